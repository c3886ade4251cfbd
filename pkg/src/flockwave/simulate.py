"""Time integration of the leader-driven flock."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .coupling import FlockSpec
from .system import SystemMatrices, build_system

__all__ = [
    "IntegratorOptions",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "relative_positions",
    "OVERFLOW_LIMIT",
]

log = logging.getLogger(__name__)

OVERFLOW_LIMIT = 1e12

_STATUS_TEXT = {
    _kernels.STATUS_OK: "ok",
    _kernels.STATUS_OVERFLOW: "overflow",
    _kernels.STATUS_NONFINITE: "non-finite state",
    _kernels.STATUS_UNDERFLOW: "step-size underflow",
    _kernels.STATUS_MAXSTEPS: "step budget exhausted",
}


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    """``method`` is ``"dopri5"`` (adaptive 4/5) or ``"rk4"`` (fixed step, bit-deterministic).

    ``n_out`` output intervals span ``[0, t_max]``; for rk4 the output stride is
    rounded to a whole number of steps.
    """

    t_max: float
    method: str = "dopri5"
    dt: float = 0.01
    atol: float = 1e-8
    rtol: float = 1e-8
    n_out: int = 4096
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not (self.dt > 0 and self.atol > 0 and self.rtol > 0):
            raise ValueError("step size and tolerances must be positive")
        if self.n_out < 1:
            raise ValueError("n_out must be at least 1")

    @property
    def stride(self) -> float:
        return self.t_max / self.n_out

    def describe(self) -> dict:
        if self.method == "rk4":
            return {"integrator": "rk4", "dt": self.dt, "t_max": self.t_max, "n_out": self.n_out}
        return {"integrator": "dopri5", "atol": self.atol, "rtol": self.rtol, "t_max": self.t_max,
                "n_out": self.n_out}


@dataclass(frozen=True)
class Trajectory:
    """Recorded positions ``z`` and velocities ``zdot`` (shape ``(n_times, n_agents)``).

    ``agents`` holds the 1-based labels of the recorded columns. When the run is cut
    short (overflow of a diverging system) ``truncated`` is set and the arrays end at
    the last finite sample.
    """

    times: np.ndarray
    z: np.ndarray
    zdot: np.ndarray
    agents: np.ndarray
    spec: FlockSpec
    options: IntegratorOptions
    truncated: bool = False
    status: str = "ok"
    steps: int = 0
    rejected: int = 0

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def v0(self) -> float:
        return float(self.spec.v0)

    def leader(self) -> np.ndarray:
        return self.v0 * self.times

    def column(self, agent: int) -> int:
        hits = np.flatnonzero(self.agents == agent)
        if hits.size == 0:
            raise KeyError(f"agent {agent} was not recorded")
        return int(hits[0])

    def last_agent_offset(self) -> np.ndarray:
        """d_N(t) = z_N(t) - v0 t, the last agent's displacement relative to the leader."""
        return self.z[:, self.column(self.N)] - self.leader()


def integrate(
    spec: FlockSpec,
    opts: IntegratorOptions,
    *,
    agents: Optional[Sequence[int]] = None,
    initial: Optional[tuple[np.ndarray, np.ndarray]] = None,
    system: Optional[SystemMatrices] = None,
) -> Trajectory:
    """Integrate d/dt (z, zdot) = M (z, zdot) + F(t) from rest (or from ``initial``).

    ``agents`` restricts recording to the given 1-based labels (default: all).
    Diverging runs stop once |z| exceeds ``OVERFLOW_LIMIT`` and come back truncated.
    """
    m = system if system is not None else build_system(spec)
    n = m.N
    labels = np.arange(1, n + 1) if agents is None else np.asarray(sorted(set(int(a) for a in agents)))
    if labels.size == 0 or labels[0] < 1 or labels[-1] > n:
        raise ValueError(f"recorded agents must lie in 1..{n}")
    obs = (labels - 1).astype(np.int64)
    y0 = np.zeros(2 * n)
    if initial is not None:
        y0[:n] = np.asarray(initial[0], dtype=float)
        y0[n:] = np.asarray(initial[1], dtype=float)
    v0 = float(spec.v0)
    args = (np.ascontiguousarray(m.cols), np.ascontiguousarray(m.wx), np.ascontiguousarray(m.wv),
            np.ascontiguousarray(m.force_x), np.ascontiguousarray(m.force_v), v0)

    if opts.method == "rk4":
        n_steps = int(round(opts.t_max / opts.dt))
        every = max(1, int(round(opts.stride / opts.dt)))
        zrec, vrec, rows, status = _kernels.rk4(y0, *args, float(opts.dt), n_steps, every, obs, OVERFLOW_LIMIT)
        times = np.arange(zrec.shape[0]) * (every * opts.dt)
        steps, rejected = n_steps, 0
    else:
        t_out = np.linspace(0.0, opts.t_max, opts.n_out + 1)
        h0 = min(opts.stride, 0.01)
        zrec, vrec, rows, status, steps, rejected = _kernels.dopri5(
            y0, *args, t_out, opts.atol, opts.rtol, h0, 1e-12 * opts.t_max, opts.max_steps, obs, OVERFLOW_LIMIT
        )
        times = t_out
    status = int(status)
    if status in (_kernels.STATUS_UNDERFLOW, _kernels.STATUS_MAXSTEPS):
        raise IntegrationError(f"simulate: {_STATUS_TEXT[status]} after {steps} steps")
    truncated = status != _kernels.STATUS_OK
    if truncated:
        good = np.all(np.isfinite(zrec[:rows]), axis=1) & np.all(np.isfinite(vrec[:rows]), axis=1)
        rows = int(np.argmin(good)) if not good.all() else rows
        log.info("run truncated at t=%.4g (%s)", times[max(rows - 1, 0)], _STATUS_TEXT[status])
    return Trajectory(
        times=times[:rows],
        z=zrec[:rows],
        zdot=vrec[:rows],
        agents=labels,
        spec=spec,
        options=opts,
        truncated=truncated,
        status=_STATUS_TEXT[status],
        steps=int(steps),
        rejected=int(rejected),
    )


def relative_positions(tr: Trajectory, include_leader: bool = False) -> np.ndarray:
    """x_k(t) - v0 t = z_k - k delta - v0 t for each recorded agent."""
    delta = float(tr.spec.delta)
    rel = tr.z - delta * tr.agents[None, :] - tr.leader()[:, None]
    if include_leader:
        rel = np.hstack([np.zeros((rel.shape[0], 1)), rel])
    return rel
