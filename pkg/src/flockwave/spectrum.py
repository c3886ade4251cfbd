"""Eigenvalues of the periodic (circle) flock and the signal velocities they imply.

On the circle both Laplacians are circulant, so each Fourier mode e^{i phi k}
decouples and the system eigenvalues are the roots of

    nu^2 - lambda_v(phi) nu - lambda_x(phi) = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import ReducedParams

__all__ = [
    "SpectrumError",
    "SpectrumSample",
    "EigenCurves",
    "LowFreqExpansion",
    "SignalVelocities",
    "lambda_at",
    "nu_roots",
    "eigencurves",
    "low_freq_expansion",
    "signal_velocities",
    "DEFAULT_SAMPLES",
]

DEFAULT_SAMPLES = 1024


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumSample:
    phi: float
    lambda_x: complex
    lambda_v: complex
    nu_plus: complex
    nu_minus: complex


@dataclass(frozen=True)
class LowFreqExpansion:
    """nu_pm(phi) ~ i phi B1_pm + phi^2 B2_pm near phi = 0."""

    B1_plus: float
    B1_minus: float
    B2_plus: float
    B2_minus: float


@dataclass(frozen=True)
class SignalVelocities:
    """Propagation speeds in agents per unit time; positive means leader -> tail."""

    c_plus: float
    c_minus: float
    discriminant: float


def lambda_at(p: ReducedParams, phi):
    """Circulant eigenvalues (lambda_x, lambda_v) at angle(s) ``phi``."""
    phi = np.asarray(phi, dtype=float)

    def lam(g, alpha, beta):
        out = np.zeros(phi.shape, dtype=complex)
        for j in range(3):
            out = out + alpha[j] * np.cos(j * phi) + 1j * beta[j] * np.sin(j * phi)
        return g * out

    lx = lam(p.g_x, p.alpha_x, p.beta_x)
    lv = lam(p.g_v, p.alpha_v, p.beta_v)
    if lx.ndim == 0:
        return complex(lx), complex(lv)
    return lx, lv


def nu_roots(lambda_x, lambda_v):
    """Both roots of nu^2 - lambda_v nu - lambda_x = 0 using the principal square root.

    No branch tracking happens here; see :func:`eigencurves` for labels that follow
    the curves continuously.
    """
    lx = np.asarray(lambda_x, dtype=complex)
    lv = np.asarray(lambda_v, dtype=complex)
    root = np.sqrt(lv * lv + 4.0 * lx)
    plus, minus = 0.5 * (lv + root), 0.5 * (lv - root)
    if plus.ndim == 0:
        return complex(plus), complex(minus)
    return plus, minus


@dataclass(frozen=True)
class EigenCurves:
    """Sampled eigencurves on the grid phi_m = 2 pi m / M folded into (-pi, pi]."""

    phi: np.ndarray
    lambda_x: np.ndarray
    lambda_v: np.ndarray
    nu_plus: np.ndarray
    nu_minus: np.ndarray

    def __len__(self) -> int:
        return self.phi.shape[0]

    def __getitem__(self, m: int) -> SpectrumSample:
        return SpectrumSample(float(self.phi[m]), complex(self.lambda_x[m]), complex(self.lambda_v[m]),
                              complex(self.nu_plus[m]), complex(self.nu_minus[m]))

    def samples(self) -> list[SpectrumSample]:
        return [self[m] for m in range(len(self))]

    @property
    def margin(self) -> float:
        """Largest real part over both curves, excluding the m = 0 sample."""
        re = np.maximum(self.nu_plus[1:].real, self.nu_minus[1:].real)
        return float(re.max()) if re.size else -math.inf


def _label_continuously(plus: np.ndarray, minus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel root pairs so that each curve moves continuously with m.

    At m = 1 (small positive phi) the root with the larger imaginary part is nu_+,
    which matches the leading-order expansion since B1_+ - B1_- > 0.
    """
    plus = plus.copy()
    minus = minus.copy()
    M = plus.shape[0]
    if M < 2:
        return plus, minus
    if plus[1].imag < minus[1].imag:
        plus[1], minus[1] = minus[1], plus[1]
    for m in range(2, M):
        keep = abs(plus[m] - plus[m - 1]) + abs(minus[m] - minus[m - 1])
        swap = abs(minus[m] - plus[m - 1]) + abs(plus[m] - minus[m - 1])
        if swap < keep:
            plus[m], minus[m] = minus[m], plus[m]
    return plus, minus


def eigencurves(p: ReducedParams, samples: int = DEFAULT_SAMPLES) -> EigenCurves:
    if samples < 64:
        raise SpectrumError(f"need at least 64 samples, got {samples}")
    m = np.arange(samples)
    phi = 2.0 * np.pi * m / samples
    phi = np.where(phi > np.pi, phi - 2.0 * np.pi, phi)
    lx, lv = lambda_at(p, phi)
    # the phi = 0 entries are a structural double zero; drop round-off
    lx[0] = 0.0
    lv[0] = 0.0
    plus, minus = nu_roots(lx, lv)
    plus, minus = _label_continuously(plus, minus)
    return EigenCurves(phi, lx, lv, plus, minus)


def _require_discriminant(p: ReducedParams, strict: bool) -> float:
    disc = p.discriminant
    if disc < 0 or (strict and disc == 0):
        raise SpectrumError(
            f"condition (v) violated: discriminant g_v^2 (beta_v1 + 2 beta_v2)^2 - 2 g_x (4 + 3 alpha_x1) "
            f"= {disc:.6g} {'<= 0' if strict else '< 0'}"
        )
    return disc


def low_freq_expansion(p: ReducedParams) -> LowFreqExpansion:
    disc = _require_discriminant(p, strict=True)
    root = math.sqrt(disc)
    gv, gx = p.g_v, p.g_x
    drift = p.drift
    av = 4.0 + 3.0 * p.alpha_v[1]
    lead = gv * drift
    curv = (gv * gv * drift * av + 2.0 * gx * p.beta_x[1]) / root
    return LowFreqExpansion(
        B1_plus=0.5 * (lead + root),
        B1_minus=0.5 * (lead - root),
        B2_plus=0.25 * (gv * av + curv),
        B2_minus=0.25 * (gv * av - curv),
    )


def signal_velocities(p: ReducedParams) -> SignalVelocities:
    disc = _require_discriminant(p, strict=False)
    half = 0.5 * math.sqrt(disc)
    mid = -0.5 * p.g_v * p.drift
    return SignalVelocities(c_plus=mid + half, c_minus=mid - half, discriminant=disc)
