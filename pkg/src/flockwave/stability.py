"""Necessary stability conditions, eigenvalue tests and solution-type classification."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coupling import CouplingConfig, ReducedParams
from .spectrum import DEFAULT_SAMPLES, SignalVelocities, eigencurves
from .system import SystemMatrices

__all__ = [
    "Condition",
    "CriteriaReport",
    "necessary_criteria",
    "circle_spectral_margin",
    "EigenReport",
    "EigenSolveError",
    "line_eigen_stability",
    "SolutionType",
    "Classification",
    "classify",
    "CONDITION_I_TOL",
    "MAX_DENSE_N",
]

CONDITION_I_TOL = 1e-10
MAX_DENSE_N = 800


@dataclass(frozen=True)
class Condition:
    id: str
    statement: str
    value: float
    margin: float
    satisfied: bool


@dataclass(frozen=True)
class CriteriaReport:
    conditions: tuple[Condition, ...]

    @property
    def overall(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def __getitem__(self, cid: str) -> Condition:
        for c in self.conditions:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def failed(self) -> list[str]:
        return [c.id for c in self.conditions if not c.satisfied]


def necessary_criteria(p: ReducedParams, rho: CouplingConfig) -> CriteriaReport:
    """Evaluate conditions (i)-(vii). Margins are >= 0 exactly when a condition holds.

    (i) is an equality and uses ``CONDITION_I_TOL``; its margin is tol - |lhs|.
    """
    gx, gv = p.g_x, p.g_v
    ax1, bx1 = p.alpha_x[1], p.beta_x[1]
    av1 = p.alpha_v[1]
    drift = p.drift
    ax, av = 4.0 + 3.0 * ax1, 4.0 + 3.0 * av1

    c1 = bx1 + 2.0 * p.beta_x[2]
    c6 = gv * gv * gx * av * av * ax + 2.0 * gv * gv * gx * drift * av * bx1 + 2.0 * gx * gx * bx1 * bx1
    c7 = gx - gv * gv * math.fsum(float(r) ** 2 for r in rho.rho_v)
    rows = [
        ("i", "beta_x1 + 2 beta_x2 = 0", c1, CONDITION_I_TOL - abs(c1)),
        ("ii", "g_v <= 0", gv, -gv),
        ("iii", "alpha_v1 in [-4/3, 0]", av1, min(av1 + 4.0 / 3.0, -av1)),
        ("iv", "g_x alpha_x1 >= 0", gx * ax1, gx * ax1),
        ("v", "g_v^2 (beta_v1 + 2 beta_v2)^2 - 2 g_x (4 + 3 alpha_x1) >= 0", p.discriminant, p.discriminant),
        ("vi", "second-order low-frequency coefficient product <= 0", c6, -c6),
        ("vii", "g_x - g_v^2 sum rho_v^2 <= 0", c7, -c7),
    ]
    return CriteriaReport(tuple(Condition(i, s, float(v), float(mg), bool(mg >= 0)) for i, s, v, mg in rows))


def circle_spectral_margin(p: ReducedParams, samples: int = DEFAULT_SAMPLES) -> float:
    """max Re nu over sampled phi != 0; negative means circle-stable at this resolution."""
    return eigencurves(p, samples).margin


class EigenSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenReport:
    N: int
    boundary: str
    eigenvalues: np.ndarray
    max_real: float
    near_zero: int
    zero_tol: float
    verdict: str

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"


def line_eigen_stability(m: SystemMatrices, zero_tol: Optional[float] = None) -> EigenReport:
    """Full spectrum of the 2N x 2N system matrix via LAPACK's Hessenberg-QR solver.

    ``zero_tol`` defaults to 1e-8 times the 1-norm of M. Up to two eigenvalues with
    |nu| <= zero_tol are accepted as a kernel; more, or any non-kernel eigenvalue
    with |Re| <= zero_tol, makes the verdict marginal.
    """
    if m.N > MAX_DENSE_N:
        raise EigenSolveError(
            f"stability: N={m.N} exceeds the dense eigensolve ceiling {MAX_DENSE_N}; "
            "use circle_spectral_margin instead"
        )
    mat = m.M
    norm = float(np.linalg.norm(mat, 1))
    tol = 1e-8 * norm if zero_tol is None else float(zero_tol)
    try:
        ev = np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(
            f"stability: eigensolver failed for N={m.N}, boundary={m.boundary.value}, "
            f"||M||_1={norm:.6g}, finite={bool(np.isfinite(mat).all())}: {exc}"
        ) from exc
    re = ev.real
    near = np.abs(re) <= tol
    kernel = np.abs(ev) <= tol
    if np.any(re > tol):
        verdict = "unstable"
    elif int(near.sum()) <= 2 and np.array_equal(near, kernel):
        verdict = "stable"
    else:
        verdict = "marginal"
    return EigenReport(
        N=m.N,
        boundary=m.boundary.value,
        eigenvalues=ev,
        max_real=float(re.max()),
        near_zero=int(near.sum()),
        zero_tol=tol,
        verdict=verdict,
    )


class SolutionType(enum.Enum):
    TYPE_I = "I"
    TYPE_II = "II"
    TYPE_III = "III"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Classification:
    type: SolutionType
    c_plus: float
    c_minus: float
    attenuating: Optional[bool] = None  # Type I only: |c_-| < c_+

    @property
    def line_stable_expected(self) -> bool:
        """Types whose waves neither grow on reflection nor fail to propagate."""
        return self.type is SolutionType.TYPE_II or (self.type is SolutionType.TYPE_I and bool(self.attenuating))


def classify(v: SignalVelocities, tol: float = 1e-9) -> Classification:
    cp, cm = v.c_plus, v.c_minus
    if abs(cp) <= tol or abs(cm) <= tol or abs(cp - cm) <= tol:
        return Classification(SolutionType.DEGENERATE, cp, cm)
    if cm < 0 < cp:
        return Classification(SolutionType.TYPE_I, cp, cm, attenuating=abs(cm) < cp)
    if 0 < cm < cp:
        return Classification(SolutionType.TYPE_II, cp, cm)
    return Classification(SolutionType.TYPE_III, cp, cm)
