"""Flock configurations: coupling coefficients, reduced parameters and spec files.

Coefficient vectors are always ordered ``(rho[-2], rho[-1], rho[0], rho[1], rho[2])``,
where negative offsets point towards the leader.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Any, Sequence

import yaml

__all__ = [
    "BoundaryKind",
    "CouplingConfig",
    "ReducedParams",
    "FlockSpec",
    "Violation",
    "ValidationReport",
    "SpecError",
    "validate_config",
    "reduce",
    "config_from_reduced",
    "parse_number",
    "format_number",
    "parse_spec",
    "serialize_spec",
    "load_spec",
    "DECENTRALIZATION_TOL",
]

DECENTRALIZATION_TOL = 1e-12
OFFSETS = (-2, -1, 0, 1, 2)


class SpecError(ValueError):
    """Malformed or invalid flock specification; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class BoundaryKind(enum.Enum):
    FIXED_INTERACTION = "fixed_interaction"
    FIXED_MASS = "fixed_mass"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value: "str | BoundaryKind") -> "BoundaryKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            choices = ", ".join(b.value for b in cls)
            raise SpecError("boundary", f"unknown boundary {value!r} (expected one of {choices})") from None


def _is_exact(x: Any) -> bool:
    return isinstance(x, Rational)


@dataclass(frozen=True)
class CouplingConfig:
    """Gains plus position/velocity coupling weights for offsets -2..2.

    Entries may be floats or exact rationals (``Fraction``/``int``); exact entries
    are kept so that decentralization can be checked without rounding.
    """

    g_x: float
    g_v: float
    rho_x: tuple
    rho_v: tuple

    def __post_init__(self):
        for name in ("rho_x", "rho_v"):
            vec = tuple(getattr(self, name))
            if len(vec) != 5:
                raise SpecError(name, f"expected 5 coefficients, got {len(vec)}")
            object.__setattr__(self, name, vec)

    def x(self, j: int) -> float:
        return float(self.rho_x[j + 2])

    def v(self, j: int) -> float:
        return float(self.rho_v[j + 2])

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in (*self.rho_x, *self.rho_v))

    @cached_property
    def reduced(self) -> "ReducedParams":
        return reduce(self)

    def scaled_time(self, s: float) -> "CouplingConfig":
        """Same flock with time measured in units 1/s (g_x -> s^2 g_x, g_v -> s g_v)."""
        return CouplingConfig(self.g_x * s * s, self.g_v * s, self.rho_x, self.rho_v)


@dataclass(frozen=True)
class ReducedParams:
    """Symmetric/antisymmetric split of the coupling weights.

    ``alpha_x[j] = rho_x[j] + rho_x[-j]`` and ``beta_x[j] = rho_x[j] - rho_x[-j]``
    for j = 1, 2, with the j = 0 entries fixed at (1, 0).
    """

    g_x: float
    g_v: float
    alpha_x: tuple[float, float, float]
    beta_x: tuple[float, float, float]
    alpha_v: tuple[float, float, float]
    beta_v: tuple[float, float, float]

    @classmethod
    def from_free(
        cls,
        g_x: float,
        g_v: float,
        alpha_x1: float,
        beta_x1: float,
        alpha_v1: float,
        beta_v1: float,
        beta_v2: float,
    ) -> "ReducedParams":
        """Fill the dependent entries so that both alpha sums vanish and condition (i) holds."""
        return cls(
            g_x=g_x,
            g_v=g_v,
            alpha_x=(1.0, alpha_x1, -(1.0 + alpha_x1)),
            beta_x=(0.0, beta_x1, -0.5 * beta_x1),
            alpha_v=(1.0, alpha_v1, -(1.0 + alpha_v1)),
            beta_v=(0.0, beta_v1, beta_v2),
        )

    @property
    def drift(self) -> float:
        """beta_v1 + 2 beta_v2, the first moment of the velocity weights."""
        return self.beta_v[1] + 2.0 * self.beta_v[2]

    @property
    def discriminant(self) -> float:
        return self.g_v ** 2 * self.drift ** 2 - 2.0 * self.g_x * (4.0 + 3.0 * self.alpha_x[1])


@dataclass(frozen=True)
class Violation:
    field: str
    constraint: str
    residual: float

    def __str__(self) -> str:
        return f"{self.field}: {self.constraint} (residual {self.residual:.6g})"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    exact: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_config(c: CouplingConfig, tol: float = DECENTRALIZATION_TOL) -> ValidationReport:
    """Check rho[0] == 1 and zero row sums. Never raises."""
    exact = c.exact
    out = []
    for name, vec in (("rho_x", c.rho_x), ("rho_v", c.rho_v)):
        center = vec[2]
        if exact:
            total = sum(Fraction(v) for v in vec)
            if Fraction(center) != 1:
                out.append(Violation(f"{name}[0]", "center weight must equal 1", abs(float(center) - 1.0)))
            if total != 0:
                out.append(Violation(name, "weights must sum to 0", abs(float(total))))
        else:
            fvec = [float(v) for v in vec]
            if float(center) != 1.0:
                out.append(Violation(f"{name}[0]", "center weight must equal 1", abs(float(center) - 1.0)))
            total = math.fsum(fvec)
            if not math.isfinite(total) or abs(total) > tol:
                out.append(Violation(name, "weights must sum to 0", abs(total)))
    for name in ("g_x", "g_v"):
        g = float(getattr(c, name))
        if not math.isfinite(g):
            out.append(Violation(name, "gain must be finite", math.inf))
    return ValidationReport(tuple(out), exact)


def reduce(c: CouplingConfig) -> ReducedParams:
    report = validate_config(c)
    if not report.ok:
        raise SpecError("config", "; ".join(str(v) for v in report.violations))
    ax = tuple([1.0] + [c.x(j) + c.x(-j) for j in (1, 2)])
    bx = tuple([0.0] + [c.x(j) - c.x(-j) for j in (1, 2)])
    av = tuple([1.0] + [c.v(j) + c.v(-j) for j in (1, 2)])
    bv = tuple([0.0] + [c.v(j) - c.v(-j) for j in (1, 2)])
    return ReducedParams(float(c.g_x), float(c.g_v), ax, bx, av, bv)


def config_from_reduced(p: ReducedParams) -> CouplingConfig:
    """Rebuild weights from the free reduced parameters.

    Only g_x, g_v, alpha_x1, beta_x1, alpha_v1, beta_v1 and beta_v2 are read; the
    remaining entries are recomputed so the result is decentralized and satisfies
    beta_x1 + 2 beta_x2 = 0.
    """
    q = ReducedParams.from_free(p.g_x, p.g_v, p.alpha_x[1], p.beta_x[1], p.alpha_v[1], p.beta_v[1], p.beta_v[2])

    def weights(alpha, beta):
        r1, rm1 = (alpha[1] + beta[1]) / 2, (alpha[1] - beta[1]) / 2
        r2, rm2 = (alpha[2] + beta[2]) / 2, (alpha[2] - beta[2]) / 2
        return (rm2, rm1, 1.0, r1, r2)

    return CouplingConfig(q.g_x, q.g_v, weights(q.alpha_x, q.beta_x), weights(q.alpha_v, q.beta_v))


@dataclass(frozen=True)
class FlockSpec:
    config: CouplingConfig
    N: int
    delta: float = 1.0
    v0: float = 1.0
    boundary: BoundaryKind = BoundaryKind.FIXED_INTERACTION

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise SpecError("N", f"agent count must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N <= 4:
            raise SpecError("N", f"need more than 4 agents, got {self.N}")
        if float(self.delta) < 0:
            raise SpecError("delta", "spacing must be non-negative")
        object.__setattr__(self, "boundary", BoundaryKind.parse(self.boundary))

    def replace(self, **changes) -> "FlockSpec":
        return replace(self, **changes)


# ---------------------------------------------------------------- file format


def parse_number(text: Any, path: str = "value"):
    """Parse ``"p/q"``, integer or decimal text.

    Rationals and integers come back exact (``Fraction``); decimals come back as float.
    """
    if isinstance(text, (int, float, Fraction)) and not isinstance(text, bool):
        return text
    if not isinstance(text, str):
        raise SpecError(path, f"expected a number, got {type(text).__name__}")
    s = text.strip()
    try:
        if "/" in s:
            return Fraction(s.replace(" ", ""))
        try:
            return Fraction(int(s))
        except ValueError:
            val = float(s)
    except (ValueError, ZeroDivisionError):
        raise SpecError(path, f"not a number: {text!r}") from None
    if not math.isfinite(val):
        raise SpecError(path, f"not a finite number: {text!r}")
    return val


def format_number(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


_REQUIRED = ("g_x", "g_v", "rho_x", "rho_v", "N", "delta", "v0", "boundary")


def _coeffs(doc: dict, name: str) -> tuple:
    raw = doc[name]
    if not isinstance(raw, list):
        raise SpecError(name, "expected a list of 5 numbers")
    if len(raw) != 5:
        raise SpecError(name, f"expected 5 numbers, got {len(raw)}")
    return tuple(parse_number(v, f"{name}[{i}]") for i, v in enumerate(raw))


def spec_from_mapping(doc: Any, *, check: bool = True) -> FlockSpec:
    if not isinstance(doc, dict):
        raise SpecError("<root>", "expected a mapping of fields")
    for name in _REQUIRED:
        if name not in doc:
            raise SpecError(name, "missing field")
    config = CouplingConfig(
        parse_number(doc["g_x"], "g_x"),
        parse_number(doc["g_v"], "g_v"),
        _coeffs(doc, "rho_x"),
        _coeffs(doc, "rho_v"),
    )
    if check:
        report = validate_config(config)
        if not report.ok:
            v = report.violations[0]
            raise SpecError(v.field, "; ".join(str(x) for x in report.violations))
    n = parse_number(doc["N"], "N")
    if not isinstance(n, Rational) or Fraction(n).denominator != 1:
        raise SpecError("N", f"agent count must be an integer, got {doc['N']!r}")
    return FlockSpec(
        config=config,
        N=int(n),
        delta=parse_number(doc["delta"], "delta"),
        v0=parse_number(doc["v0"], "v0"),
        boundary=BoundaryKind.parse(doc["boundary"]),
    )


def parse_spec(text: str, *, check: bool = True) -> FlockSpec:
    """Parse a YAML spec document. All scalars are read as text so rationals stay exact."""
    try:
        doc = yaml.load(text, Loader=yaml.BaseLoader)
    except yaml.YAMLError as exc:
        raise SpecError("<document>", f"malformed document: {exc}") from None
    return spec_from_mapping(doc, check=check)


def load_spec(path, *, check: bool = True) -> FlockSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), check=check)


def serialize_spec(spec: FlockSpec) -> str:
    c = spec.config

    def vec(v):
        return "[" + ", ".join(_quote(format_number(x)) for x in v) + "]"

    lines = [
        f"g_x: {_quote(format_number(c.g_x))}",
        f"g_v: {_quote(format_number(c.g_v))}",
        f"rho_x: {vec(c.rho_x)}",
        f"rho_v: {vec(c.rho_v)}",
        f"N: {spec.N}",
        f"delta: {_quote(format_number(spec.delta))}",
        f"v0: {_quote(format_number(spec.v0))}",
        f"boundary: {spec.boundary.value}",
    ]
    return "\n".join(lines) + "\n"


def _quote(s: str) -> str:
    return f'"{s}"' if "/" in s else s
