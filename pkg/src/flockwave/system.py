"""Laplacian assembly and leader forcing for the three boundary kinds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import BoundaryKind, CouplingConfig, FlockSpec, SpecError

__all__ = ["SystemMatrices", "build_system", "build_matrices", "leader_force"]


@dataclass(frozen=True)
class SystemMatrices:
    """Banded Laplacians of an N-agent flock.

    Row ``k`` (0-based, agent ``k + 1``) reads ``cols[k, :]`` with weights ``wx[k, :]``
    (positions) and ``wv[k, :]`` (velocities); gains are already folded in. Unused
    slots point at the row itself with zero weight. ``force_x``/``force_v`` hold the
    coefficients of the leader's position and velocity in the equations of agents 1
    and 2.
    """

    N: int
    boundary: BoundaryKind
    cols: np.ndarray
    wx: np.ndarray
    wv: np.ndarray
    force_x: np.ndarray
    force_v: np.ndarray

    def _dense(self, w: np.ndarray) -> np.ndarray:
        out = np.zeros((self.N, self.N))
        rows = np.repeat(np.arange(self.N), self.cols.shape[1])
        np.add.at(out, (rows, self.cols.ravel()), w.ravel())
        return out

    @property
    def L_x(self) -> np.ndarray:
        return self._dense(self.wx)

    @property
    def L_v(self) -> np.ndarray:
        return self._dense(self.wv)

    @property
    def M(self) -> np.ndarray:
        """The 2N x 2N first-order system matrix [[0, I], [L_x, L_v]]."""
        n = self.N
        m = np.zeros((2 * n, 2 * n))
        m[:n, n:] = np.eye(n)
        m[n:, :n] = self.L_x
        m[n:, n:] = self.L_v
        return m


def _rows(rho: tuple[float, ...], n: int, boundary: BoundaryKind):
    """Column indices and unscaled weights for one Laplacian, plus the leader coefficients."""
    r = {j: float(rho[j + 2]) for j in range(-2, 3)}
    cols = np.empty((n, 5), dtype=np.int64)
    w = np.zeros((n, 5))
    for k in range(n):
        for s, j in enumerate(range(-2, 3)):
            c = k + j
            if boundary is BoundaryKind.PERIODIC:
                cols[k, s] = c % n
                w[k, s] = r[j]
            elif 0 <= c < n:
                cols[k, s] = c
                w[k, s] = r[j]
            else:
                cols[k, s] = k
    if boundary is BoundaryKind.PERIODIC:
        return cols, w, np.zeros(2)

    # slot 2 is the diagonal; out-of-chain slots are already zero and the
    # leader enters through `lead`
    if boundary is BoundaryKind.FIXED_INTERACTION:
        w[0, 2] = -(r[-1] + r[1] + r[2])
        w[n - 2, 2] = -(r[-2] + r[-1] + r[1])
        w[n - 1, 2] = -(r[-2] + r[-1])
        lead = np.array([r[-1], r[-2]])
    else:
        w[n - 2, 3] = r[1] + r[2]
        w[n - 1, 2] = 1.0 + r[1] + r[2]
        lead = np.array([r[-2] + r[-1], r[-2]])
    return cols, w, lead


def build_matrices(config: CouplingConfig, n: int, boundary: BoundaryKind | str) -> SystemMatrices:
    boundary = BoundaryKind.parse(boundary)
    if n <= 4:
        raise SpecError("N", f"need more than 4 agents, got {n}")
    cols, ux, lead_x = _rows(config.rho_x, n, boundary)
    _, uv, lead_v = _rows(config.rho_v, n, boundary)
    gx, gv = float(config.g_x), float(config.g_v)
    for arr in (cols, ux, uv):
        arr.setflags(write=False)
    return SystemMatrices(
        N=n,
        boundary=boundary,
        cols=cols,
        wx=gx * ux,
        wv=gv * uv,
        force_x=gx * lead_x,
        force_v=gv * lead_v,
    )


def build_system(spec: FlockSpec) -> SystemMatrices:
    return build_matrices(spec.config, spec.N, spec.boundary)


def leader_force(spec: FlockSpec, m: SystemMatrices, t: float) -> np.ndarray:
    """External forcing F(t) of the first-order system for a leader at z0 = v0 t."""
    v0 = float(spec.v0)
    f = np.zeros(2 * m.N)
    f[m.N:m.N + 2] = m.force_x * (v0 * t) + m.force_v * v0
    return f
