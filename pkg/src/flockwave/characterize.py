"""Predicted and measured transient descriptors of the last agent.

Everything here works on d_N(t) = z_N(t) - v0 t, the last agent's offset from the
leader. Predictions come from the signal velocities; measurements come from a
simulated (or synthetic) d_N sampled on a uniform grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import peak_prominences

from .simulate import Trajectory
from .spectrum import SignalVelocities
from .stability import SolutionType, classify

__all__ = [
    "CharacterizationError",
    "Type1Prediction",
    "Type2Prediction",
    "Type1Measurement",
    "Type2Measurement",
    "predict_type1",
    "predict_type2",
    "find_extrema",
    "measure_type1",
    "measure_type2",
    "measure_type1_signal",
    "measure_type2_signal",
    "relative_error",
    "horizon",
]

EXTREMUM_WINDOW = 5
MIN_PROMINENCE = 1e-3  # fraction of the signal range
SHAPE_RESIDUAL_MAX = 0.05  # rms fit residual over |A|


class CharacterizationError(ValueError):
    pass


# ---------------------------------------------------------------- predictions


@dataclass(frozen=True)
class Type1Prediction:
    """Reflecting wave: extrema A_k at t_k = N/c_+ + (k-1) T/2."""

    amplitudes: tuple[float, ...]
    T: float
    alpha: float
    times: tuple[float, ...]
    N: int
    v0: float

    def descriptors(self) -> dict[str, float]:
        return {"A1": abs(self.amplitudes[0]), "alpha": self.alpha, "T": self.T}

    def template(self, t) -> np.ndarray:
        """Piecewise-linear zigzag through (0, 0) and the predicted extrema."""
        knots_t = np.concatenate([[0.0], self.times])
        knots_d = np.concatenate([[0.0], self.amplitudes])
        return np.interp(np.asarray(t, dtype=float), knots_t, knots_d)


@dataclass(frozen=True)
class Type2Prediction:
    A: float  # signed, equal to -v0 T1
    T1: float
    T2: float
    slope: float  # ramp slope on (T1, T2)
    N: int
    v0: float

    def descriptors(self) -> dict[str, float]:
        return {"A": abs(self.A), "T1": self.T1, "T2": self.T2}

    def template(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.where(t < self.T1, -self.v0 * t, self.A + self.slope * (t - self.T1))
        return np.where(t >= self.T2, 0.0, out)


def _require(v: SignalVelocities, kind: SolutionType) -> None:
    got = classify(v).type
    if got is not kind:
        raise CharacterizationError(
            f"characterize: velocities c+={v.c_plus:.6g}, c-={v.c_minus:.6g} are {got.value}, "
            f"expected {kind.value}"
        )


def predict_type1(v: SignalVelocities, N: int, v0: float = 1.0, k_max: int = 3) -> Type1Prediction:
    _require(v, SolutionType.TYPE_I)
    if k_max < 1:
        raise CharacterizationError("k_max must be at least 1")
    cp, cm = v.c_plus, v.c_minus
    a1 = -v0 * N / cp
    ratio = cm / cp
    T = 2.0 * N * (1.0 / cp - 1.0 / cm)
    amps = tuple(a1 * ratio ** k for k in range(k_max))
    times = tuple(N / cp + 0.5 * k * T for k in range(k_max))
    return Type1Prediction(amps, T, abs(ratio), times, N, float(v0))


def predict_type2(v: SignalVelocities, N: int, v0: float = 1.0) -> Type2Prediction:
    _require(v, SolutionType.TYPE_II)
    cp, cm = v.c_plus, v.c_minus
    return Type2Prediction(
        A=-v0 * N / cp,
        T1=N / cp,
        T2=N / cm,
        slope=v0 * cm / (cp - cm),
        N=N,
        v0=float(v0),
    )


def horizon(pred: Union[Type1Prediction, Type2Prediction]) -> float:
    """Simulation length that comfortably contains the descriptors being measured.

    Type I needs three extrema, the third at N/c_+ + T; Type II needs the stop at T2.
    """
    if isinstance(pred, Type1Prediction):
        return pred.times[0] + 1.3 * pred.T
    return 1.25 * pred.T2


# ---------------------------------------------------------------- detection


def find_extrema(t: np.ndarray, d: np.ndarray, min_prominence: float = MIN_PROMINENCE):
    """Strict extrema over a centred 5-sample window, refined by a parabola.

    Returns (times, values, kinds) with kind +1 for a maximum and -1 for a minimum.
    Extrema whose prominence is below ``min_prominence`` times the signal range
    are dropped.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    h = EXTREMUM_WINDOW // 2
    if n < EXTREMUM_WINDOW:
        return np.empty(0), np.empty(0), np.empty(0, dtype=int)
    centre = d[h:n - h]
    is_max = np.ones(centre.shape, dtype=bool)
    is_min = np.ones(centre.shape, dtype=bool)
    for off in range(-h, h + 1):
        if off == 0:
            continue
        other = d[h + off:n - h + off]
        is_max &= centre > other
        is_min &= centre < other
    span = float(d.max() - d.min())
    keep = []
    for kind, mask, sig in ((1, is_max, d), (-1, is_min, -d)):
        idx = np.flatnonzero(mask) + h
        if idx.size == 0:
            continue
        prom = peak_prominences(sig, idx)[0]
        for i in idx[prom >= min_prominence * span]:
            keep.append((int(i), kind))
    keep.sort()
    times, values, kinds = [], [], []
    for i, kind in keep:
        y0, y1, y2 = d[i - 1], d[i], d[i + 1]
        curv = y0 - 2.0 * y1 + y2
        shift = 0.0 if curv == 0 else 0.5 * (y0 - y2) / curv
        shift = min(1.0, max(-1.0, shift))
        dt = t[i + 1] - t[i]
        times.append(t[i] + shift * dt)
        values.append(y1 - 0.25 * (y0 - y2) * shift)
        kinds.append(kind)
    return np.array(times), np.array(values), np.array(kinds, dtype=int)


def _hinge_design(t: np.ndarray, knots) -> np.ndarray:
    cols = [np.ones_like(t), t] + [np.maximum(t - k, 0.0) for k in knots]
    return np.column_stack(cols)


@dataclass(frozen=True)
class HingeFit:
    """Continuous piecewise-linear least-squares fit with free breakpoints."""

    knots: tuple[float, ...]
    slopes: tuple[float, ...]
    rms: float


def fit_hinges(t: np.ndarray, d: np.ndarray, init) -> HingeFit:
    """Optimize breakpoint positions; the linear coefficients are solved exactly
    for each trial (variable projection)."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    lo, hi = float(t[0]), float(t[-1])
    stride = (hi - lo) / max(len(t) - 1, 1)

    def resid(knots):
        X = _hinge_design(t, knots)
        coef, *_ = np.linalg.lstsq(X, d, rcond=None)
        return d - X @ coef

    x0 = np.clip(np.sort(np.asarray(init, dtype=float)), lo + stride, hi - stride)
    sol = least_squares(resid, x0, bounds=(lo, hi), diff_step=1e-3 * stride / max(hi, 1.0),
                        x_scale=stride, xtol=1e-12, ftol=1e-14, gtol=1e-14)
    knots = np.sort(sol.x)
    X = _hinge_design(t, knots)
    coef, *_ = np.linalg.lstsq(X, d, rcond=None)
    slopes = np.cumsum(coef[1:])
    r = d - X @ coef
    return HingeFit(tuple(float(k) for k in knots), tuple(float(s) for s in slopes),
                    float(np.sqrt(np.mean(r * r))))


# ---------------------------------------------------------------- measurements


@dataclass(frozen=True)
class Type1Measurement:
    amplitudes: tuple[float, ...]
    T: float
    alpha: float
    extremum_times: tuple[float, ...]
    ratios: tuple[float, ...]
    corner_times: tuple[float, ...]
    T_extrema: float
    fit_rms: float

    def descriptors(self) -> dict[str, float]:
        return {"A1": abs(self.amplitudes[0]), "alpha": self.alpha, "T": self.T}


@dataclass(frozen=True)
class Type2Measurement:
    A: float
    T1: float
    T2: float
    ramp_slope: float
    fit_T1: float
    fit_T2: float
    fit_rms: float
    blind_T1: Optional[float] = None
    blind_T2: Optional[float] = None
    extras: Mapping[str, float] = field(default_factory=dict)

    def descriptors(self) -> dict[str, float]:
        return {"A": abs(self.A), "T1": self.T1, "T2": self.T2}


def measure_type1_signal(t, d, min_prominence: float = MIN_PROMINENCE) -> Type1Measurement:
    """Descriptors of a reflecting-wave signal d_N(t).

    A_k are the signed extremum values and alpha the mean of |A_{k+1}/A_k|. T is the
    spacing of the first and third slope corners of a 3-breakpoint hinge fit seeded at
    the extremum times; the raw extremum spacing is kept as ``T_extrema``.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    et, ev, kinds = find_extrema(t, d, min_prominence)
    if et.size < 3:
        raise CharacterizationError(
            f"characterize: found {et.size} extrema of d_N, need at least 3 (simulate longer?)"
        )
    if np.any(kinds[1:] == kinds[:-1]):
        bad = int(np.flatnonzero(kinds[1:] == kinds[:-1])[0])
        raise CharacterizationError(
            f"characterize: extrema do not alternate near t={et[bad]:.6g} and t={et[bad + 1]:.6g}"
        )
    ratios = np.abs(ev[1:] / ev[:-1])
    end = min(t[-1], et[2] + 0.5 * (et[2] - et[1]))
    win = t <= end
    fit = fit_hinges(t[win], d[win], et[:3])
    corners = fit.knots
    return Type1Measurement(
        amplitudes=tuple(float(x) for x in ev),
        T=float(corners[2] - corners[0]),
        alpha=float(ratios.mean()),
        extremum_times=tuple(float(x) for x in et),
        ratios=tuple(float(x) for x in ratios),
        corner_times=corners,
        T_extrema=float(et[2] - et[0]),
        fit_rms=fit.rms,
    )


def measure_type1(tr: Trajectory, min_prominence: float = MIN_PROMINENCE) -> Type1Measurement:
    return measure_type1_signal(tr.times, tr.last_agent_offset(), min_prominence)


def _blind_grid(t: np.ndarray, d: np.ndarray, n: int = 24) -> tuple[float, float]:
    lo, hi = float(t[0]), float(t[-1])
    grid = np.linspace(lo, hi, n + 2)[1:-1]
    best, arg = math.inf, (grid[0], grid[-1])
    for i, a in enumerate(grid):
        for b in grid[i + 1:]:
            X = _hinge_design(t, (a, b))
            coef, *_ = np.linalg.lstsq(X, d, rcond=None)
            r = d - X @ coef
            s = float(r @ r)
            if s < best:
                best, arg = s, (a, b)
    return arg


def measure_type2_signal(t, d, v0: float, init: Optional[tuple[float, float]] = None,
                         blind: bool = True) -> Type2Measurement:
    """Descriptors of a reflectionless-wave signal d_N(t).

    A is the signed minimum of d_N and T1 = |A| / v0 (the leader pulls away at v0
    until the start signal arrives). T2 is where the ramp leaving that minimum, with
    the slope of the middle segment of a 3-piece hinge fit, returns to zero. The fit
    breakpoints themselves are reported as ``fit_T1``/``fit_T2``.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    if v0 <= 0:
        raise CharacterizationError("characterize: v0 must be positive for Type II measurement")
    i_min = int(np.argmin(d))
    A = float(d[i_min])
    if not A < 0:
        raise CharacterizationError("characterize: d_N never drops below zero; no start signal seen")
    blind_knots = _blind_grid(t, d)
    seed = init if init is not None else blind_knots
    fit = fit_hinges(t, d, seed)
    slope = fit.slopes[1]
    if fit.rms > SHAPE_RESIDUAL_MAX * abs(A):
        raise CharacterizationError(
            f"characterize: 3-piece fit rms {fit.rms:.4g} exceeds {SHAPE_RESIDUAL_MAX} |A| "
            f"= {SHAPE_RESIDUAL_MAX * abs(A):.4g}; not a Type II shape"
        )
    if not slope > 0:
        raise CharacterizationError(f"characterize: ramp slope {slope:.4g} is not positive")
    T1 = abs(A) / v0
    bT1 = bT2 = None
    if blind:
        bfit = fit_hinges(t, d, blind_knots) if init is not None else fit
        bT1, bT2 = bfit.knots
    return Type2Measurement(
        A=A,
        T1=T1,
        T2=T1 + abs(A) / slope,
        ramp_slope=slope,
        fit_T1=fit.knots[0],
        fit_T2=fit.knots[1],
        fit_rms=fit.rms,
        blind_T1=bT1,
        blind_T2=bT2,
        extras={"t_min": float(t[i_min])},
    )


def measure_type2(tr: Trajectory, prediction: Optional[Type2Prediction] = None,
                  blind: bool = True) -> Type2Measurement:
    init = (prediction.T1, prediction.T2) if prediction is not None else None
    return measure_type2_signal(tr.times, tr.last_agent_offset(), tr.v0, init=init, blind=blind)


def relative_error(measured, predicted):
    """|measured - predicted| / |predicted|, elementwise over matching descriptors.

    Accepts two numbers, two mappings with the same keys, or objects exposing
    ``descriptors()``.
    """
    if hasattr(measured, "descriptors"):
        measured = measured.descriptors()
    if hasattr(predicted, "descriptors"):
        predicted = predicted.descriptors()
    if isinstance(measured, Mapping) or isinstance(predicted, Mapping):
        if not (isinstance(measured, Mapping) and isinstance(predicted, Mapping)):
            raise CharacterizationError("characterize: cannot compare a mapping with a scalar")
        if set(measured) != set(predicted):
            raise CharacterizationError(
                f"characterize: descriptor mismatch {sorted(measured)} vs {sorted(predicted)}"
            )
        return {k: relative_error(measured[k], predicted[k]) for k in predicted}
    m, p = float(measured), float(predicted)
    if p == 0:
        raise CharacterizationError("characterize: predicted value is zero; relative error undefined")
    return abs(m - p) / abs(p)
