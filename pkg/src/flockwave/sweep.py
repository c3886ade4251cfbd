"""Configuration populations, criteria-vs-eigensolve comparison and the N-ladder
error-scaling experiment."""
from __future__ import annotations

import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
import yaml

from .characterize import (
    CharacterizationError,
    horizon,
    measure_type1,
    measure_type2,
    predict_type1,
    predict_type2,
    relative_error,
)
from .coupling import BoundaryKind, CouplingConfig, FlockSpec, ReducedParams, config_from_reduced
from .simulate import IntegrationError, IntegratorOptions, integrate
from .spectrum import signal_velocities
from .stability import (
    SolutionType,
    circle_spectral_margin,
    classify,
    line_eigen_stability,
    necessary_criteria,
)
from .system import build_matrices

__all__ = [
    "FREE_PARAMS",
    "SweepPlan",
    "Member",
    "SweepRecord",
    "Discrepancy",
    "DiscrepancyReport",
    "load_plan",
    "generate_configurations",
    "filter_criteria",
    "filter_eigen",
    "in_criteria_set",
    "compare_sets",
    "compare_population",
    "build_pool",
    "error_scaling_experiment",
    "aggregate",
    "fit_slopes",
    "worker_count",
    "DESCRIPTORS",
]

log = logging.getLogger(__name__)

FREE_PARAMS = ("alpha_x1", "beta_x1", "alpha_v1", "beta_v1", "beta_v2")
DESCRIPTORS = {"I": ("A1", "alpha", "T"), "II": ("A", "T1", "T2")}

DEFAULT_RANGES = {
    "alpha_x1": (-2.5, 0.5),
    "beta_x1": (-2.0, 2.0),
    "alpha_v1": (-4.0 / 3.0, 0.0),
    "beta_v1": (-2.0, 2.0),
    "beta_v2": (-2.0, 2.0),
}


@dataclass(frozen=True)
class SweepPlan:
    """What to generate and how to run it.

    ``scheme`` is ``"random"`` (uniform over ``ranges``, each an interval) or
    ``"grid"`` (cartesian product of ``values``). ``horizon_factor`` caps the
    predicted period (Type I) or second response time (Type II) at that multiple
    of N at the largest ladder size. ``min_alpha`` drops Type I configurations whose
    predicted attenuation leaves the third extremum (alpha^2 A1) too small to detect.
    """

    scheme: str = "random"
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    values: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    g_x: float = -2.0
    g_v: float = -2.0
    count_type1: int = 50
    count_type2: int = 50
    horizon_factor: float = 10.0
    min_alpha: float = 0.1
    n_max: int = 6
    base_N: int = 25
    boundaries: tuple[str, ...] = ("fixed_interaction", "fixed_mass")
    pool_N: int = 100
    rtol: float = 1e-8
    atol: float = 1e-8
    max_draws: int = 200_000

    def __post_init__(self):
        if self.scheme not in ("random", "grid"):
            raise ValueError(f"sweep: unknown scheme {self.scheme!r}")
        src = self.ranges if self.scheme == "random" else self.values
        missing = [k for k in FREE_PARAMS if k not in src]
        if missing:
            raise ValueError(f"sweep: no {'range' if self.scheme == 'random' else 'values'} for {missing}")
        for k in FREE_PARAMS:
            if self.scheme == "random":
                lo, hi = (float(x) for x in self.ranges[k])
                if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                    raise ValueError(f"sweep: range for {k} must be finite with lo <= hi, got {(lo, hi)}")
            elif len(self.values[k]) == 0:
                raise ValueError(f"sweep: empty value list for {k}")
        if self.count_type1 < 1 or self.count_type2 < 1:
            raise ValueError("sweep: pool counts must be at least 1")
        if not 0 <= self.min_alpha < 1:
            raise ValueError("sweep: min_alpha must lie in [0, 1)")
        if not 0 <= self.n_max <= 11:
            raise ValueError("sweep: n_max must lie in 0..11")
        for b in self.boundaries:
            BoundaryKind.parse(b)

    @property
    def ladder(self) -> tuple[int, ...]:
        return tuple(self.base_N * 2 ** n for n in range(self.n_max + 1))

    def describe(self) -> dict:
        out = {k: getattr(self, k) for k in ("scheme", "g_x", "g_v", "count_type1", "count_type2",
                                             "horizon_factor", "min_alpha", "n_max", "base_N", "pool_N", "rtol", "atol")}
        out["boundaries"] = list(self.boundaries)
        if self.scheme == "random":
            out["ranges"] = {k: list(map(float, self.ranges[k])) for k in FREE_PARAMS}
        else:
            out["values"] = {k: list(map(float, self.values[k])) for k in FREE_PARAMS}
        return out


def load_plan(path) -> SweepPlan:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError("sweep: plan file must be a mapping")
    kw = dict(doc)
    for key in ("ranges", "values"):
        if key in kw:
            merged = dict(DEFAULT_RANGES) if key == "ranges" else {}
            merged.update({k: tuple(float(x) for x in v) for k, v in kw[key].items()})
            kw[key] = merged
    if "boundaries" in kw:
        kw["boundaries"] = tuple(kw["boundaries"])
    known = set(SweepPlan.__dataclass_fields__)
    unknown = set(kw) - known
    if unknown:
        raise ValueError(f"sweep: unknown plan fields {sorted(unknown)}")
    return SweepPlan(**kw)


def worker_count(requested: Optional[int] = None) -> int:
    """Requested workers, capped by FLOCKWAVE_THREADS and the CPU count."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("FLOCKWAVE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, os.cpu_count() or 1))


# ---------------------------------------------------------------- generation and filters


@dataclass(frozen=True)
class Member:
    id: str
    config: CouplingConfig


def generate_configurations(plan: SweepPlan, seed: int, limit: Optional[int] = None) -> Iterator[Member]:
    """Valid configurations built through ``config_from_reduced``.

    Random streams are endless unless ``limit`` is given; grids stop after the last
    combination. Ids are stable for a given plan and seed.
    """
    if plan.scheme == "grid":
        combos = itertools.product(*(plan.values[k] for k in FREE_PARAMS))
        for i, free in enumerate(combos):
            if limit is not None and i >= limit:
                return
            p = ReducedParams.from_free(plan.g_x, plan.g_v, *map(float, free))
            yield Member(f"g{i:07d}", config_from_reduced(p))
        return
    rng = np.random.default_rng(seed)
    lo = np.array([plan.ranges[k][0] for k in FREE_PARAMS], dtype=float)
    hi = np.array([plan.ranges[k][1] for k in FREE_PARAMS], dtype=float)
    i = 0
    while limit is None or i < limit:
        free = lo + (hi - lo) * rng.random(len(FREE_PARAMS))
        p = ReducedParams.from_free(plan.g_x, plan.g_v, *free.tolist())
        yield Member(f"s{seed}-{i:07d}", config_from_reduced(p))
        i += 1


def in_criteria_set(config: CouplingConfig, pool: Optional[str] = None, attenuation: bool = True) -> bool:
    """Membership in the criteria-filtered set.

    ``pool=None`` keeps every configuration passing (i)-(vii), except Type I ones
    without attenuation when ``attenuation`` is set. ``pool="I"`` or ``"II"``
    additionally requires that solution type.
    """
    p = config.reduced
    if not necessary_criteria(p, config).overall:
        return False
    cls = classify(signal_velocities(p))
    is_one = cls.type is SolutionType.TYPE_I
    if pool == "I":
        return is_one and bool(cls.attenuating)
    if pool == "II":
        return cls.type is SolutionType.TYPE_II
    return not (attenuation and is_one and not cls.attenuating)


def filter_criteria(stream: Iterable[Member], pool: Optional[str] = None,
                    attenuation: bool = True) -> Iterator[Member]:
    for m in stream:
        if in_criteria_set(m.config, pool, attenuation):
            yield m


def filter_eigen(stream: Iterable[Member], N: int,
                 boundary: str = "fixed_interaction") -> Iterator[Member]:
    for m in stream:
        try:
            rep = line_eigen_stability(build_matrices(m.config, N, boundary))
        except Exception as exc:
            raise RuntimeError(f"sweep: eigensolve failed for config {m.id} at N={N}: {exc}") from exc
        if rep.stable:
            yield m


# ---------------------------------------------------------------- P_C versus P_S


# Persistent discrepancies with all criteria passing but an unstable line system.
# "boundary_induced": the circle is stable, so the instability comes from the ends
# of the chain. "criteria_insufficient": the circle itself is unstable at some
# phi the necessary conditions do not probe.
LOGGED_CLASSES = ("boundary_induced", "criteria_insufficient")


@dataclass(frozen=True)
class Discrepancy:
    id: str
    in_criteria: bool
    resolved_at: Optional[int]
    max_real: dict
    margin: float
    failed: tuple[str, ...]
    type: str
    category: str

    @property
    def persistent(self) -> bool:
        return self.resolved_at is None


@dataclass(frozen=True)
class DiscrepancyReport:
    N: int
    escalation: tuple[int, ...]
    boundary: str
    universe: int
    in_criteria: int
    in_eigen: int
    items: tuple[Discrepancy, ...]

    @property
    def persistent(self) -> list[Discrepancy]:
        return [d for d in self.items if d.persistent]

    @property
    def resolved(self) -> list[Discrepancy]:
        return [d for d in self.items if not d.persistent]

    @property
    def unexplained(self) -> list[Discrepancy]:
        return [d for d in self.persistent if d.category not in LOGGED_CLASSES]

    def counts(self) -> dict[str, int]:
        out = {"universe": self.universe, "criteria_set": self.in_criteria, "eigen_set": self.in_eigen,
               "discrepancies": len(self.items), "resolved": len(self.resolved),
               "persistent": len(self.persistent)}
        for cat in ("boundary_induced", "criteria_insufficient", "eigen_stable_criteria_fail"):
            out[cat] = sum(1 for d in self.persistent if d.category == cat)
        return out


def _categorize(config: CouplingConfig, in_c: bool, margin: float) -> str:
    if in_c or necessary_criteria(config.reduced, config).overall:
        return "boundary_induced" if margin < 0 else "criteria_insufficient"
    return "eigen_stable_criteria_fail"


def compare_sets(
    universe: Mapping[str, CouplingConfig],
    P_C: set,
    P_S: set,
    N: int = 100,
    escalation: Sequence[int] = (200, 400, 800),
    boundary: str = "fixed_interaction",
    samples: int = 1024,
) -> DiscrepancyReport:
    """Symmetric difference of the two sets, each disagreement re-tested at
    increasing N until the eigensolve agrees with the criteria or the ladder ends."""
    items = []
    for cid in sorted(set(P_C) ^ set(P_S)):
        cfg = universe[cid]
        in_c = cid in P_C
        resolved = None
        reals = {}
        for n in escalation:
            rep = line_eigen_stability(build_matrices(cfg, n, boundary))
            reals[n] = rep.max_real
            if rep.stable == in_c:
                resolved = n
                break
        p = cfg.reduced
        margin = circle_spectral_margin(p, samples)
        crit = necessary_criteria(p, cfg)
        typ = classify(signal_velocities(p)).type.value if p.discriminant >= 0 else "complex"
        items.append(Discrepancy(cid, in_c, resolved, reals, margin, tuple(crit.failed), typ,
                                 "resolved" if resolved else _categorize(cfg, in_c, margin)))
    return DiscrepancyReport(N, tuple(escalation), BoundaryKind.parse(boundary).value, len(universe),
                             len(P_C), len(P_S), tuple(items))


def compare_population(
    plan: SweepPlan,
    count: int,
    seed: int,
    N: int = 100,
    escalation: Sequence[int] = (200, 400, 800),
    boundary: str = "fixed_interaction",
    attenuation: bool = True,
    extra: Optional[Mapping[str, CouplingConfig]] = None,
) -> DiscrepancyReport:
    """Generate ``count`` configurations (plus any ``extra`` ones), build both sets at
    size N and compare them."""
    universe = {m.id: m.config for m in generate_configurations(plan, seed, limit=count)}
    if extra:
        universe.update(extra)
    members = [Member(k, v) for k, v in universe.items()]
    P_C = {m.id for m in filter_criteria(members, attenuation=attenuation)}
    P_S = {m.id for m in filter_eigen(members, N, boundary)}
    return compare_sets(universe, P_C, P_S, N, escalation, boundary)


# ---------------------------------------------------------------- error scaling


@dataclass(frozen=True)
class PoolMember:
    id: str
    config: CouplingConfig
    type: str  # "I" or "II"


@dataclass(frozen=True)
class SweepRecord:
    config_id: str
    type: str
    N: int
    boundary: str
    errors: dict
    predicted: dict
    measured: dict
    wall_time: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def key(self):
        return (self.config_id, self.N, self.boundary)


def _prediction(member: PoolMember, N: int):
    v = signal_velocities(member.config.reduced)
    return predict_type1(v, N) if member.type == "I" else predict_type2(v, N)


def build_pool(plan: SweepPlan, kind: str, seed: int, count: Optional[int] = None) -> list[PoolMember]:
    """Rejection-sample ``count`` configurations of one type.

    Kept configurations pass the criteria (with attenuation for Type I), respect the
    horizon cap and the attenuation floor, are circle-stable at 1024 samples and line-stable at ``plan.pool_N``
    for every boundary kind in the plan.
    """
    if kind not in ("I", "II"):
        raise ValueError(f"sweep: pool type must be 'I' or 'II', got {kind!r}")
    want = count if count is not None else (plan.count_type1 if kind == "I" else plan.count_type2)
    out: list[PoolMember] = []
    stream = generate_configurations(plan, seed)
    for draws, m in enumerate(stream):
        if draws >= plan.max_draws:
            raise RuntimeError(f"sweep: only {len(out)} of {want} Type {kind} configurations "
                               f"after {plan.max_draws} draws")
        if not in_criteria_set(m.config, kind):
            continue
        pm = PoolMember(m.id, m.config, kind)
        pred = _prediction(pm, 1)
        span = pred.T if kind == "I" else pred.T2
        if span > plan.horizon_factor:  # descriptors scale linearly with N
            continue
        if kind == "I" and pred.alpha < plan.min_alpha:
            continue
        if circle_spectral_margin(m.config.reduced) >= 0:
            continue
        if not all(line_eigen_stability(build_matrices(m.config, plan.pool_N, b)).stable
                   for b in plan.boundaries):
            continue
        out.append(pm)
        if len(out) >= want:
            break
    return out


def _run_task(args) -> SweepRecord:
    member, N, boundary, rtol, atol = args
    t0 = time.perf_counter()
    pred = _prediction(member, N)
    spec = FlockSpec(member.config, N, boundary=boundary)
    opts = IntegratorOptions(t_max=horizon(pred), rtol=rtol, atol=atol)
    status = "ok"
    errors, measured = {}, {}
    try:
        tr = integrate(spec, opts, agents=[N])
        if tr.truncated:
            status = f"truncated:{tr.status}"
        else:
            meas = measure_type1(tr) if member.type == "I" else measure_type2(tr, pred, blind=False)
            measured = meas.descriptors()
            errors = relative_error(measured, pred.descriptors())
    except (IntegrationError, CharacterizationError) as exc:
        status = f"failed:{type(exc).__name__}: {exc}"
    return SweepRecord(member.id, member.type, N, BoundaryKind.parse(boundary).value, errors,
                       pred.descriptors(), measured, time.perf_counter() - t0, status)


def error_scaling_experiment(
    pool: Sequence[PoolMember],
    ladder: Sequence[int],
    boundaries: Sequence[str] = ("fixed_interaction", "fixed_mass"),
    rtol: float = 1e-8,
    atol: float = 1e-8,
    workers: Optional[int] = None,
    progress=None,
) -> list[SweepRecord]:
    """Simulate and measure every (config, N, boundary); records come back sorted."""
    tasks = [(m, int(N), b, rtol, atol) for m in pool for N in ladder for b in boundaries]
    # big runs first so the pool drains evenly
    tasks.sort(key=lambda a: -a[1])
    n = worker_count(workers)
    out = []
    if n == 1:
        for i, a in enumerate(tasks):
            out.append(_run_task(a))
            if progress:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            for i, rec in enumerate(ex.map(_run_task, tasks, chunksize=1)):
                out.append(rec)
                if progress:
                    progress(i + 1, len(tasks))
    bad = [r for r in out if not r.ok]
    if bad:
        log.warning("%d of %d runs excluded from aggregates", len(bad), len(out))
    return sorted(out, key=lambda r: r.key())


@dataclass(frozen=True)
class Aggregate:
    type: str
    boundary: str
    N: int
    descriptor: str
    count: int
    mean: float
    max: float


def aggregate(records: Iterable[SweepRecord]) -> list[Aggregate]:
    """Per (type, boundary, N, descriptor) mean and max over successful records."""
    groups: dict = {}
    for r in records:
        if not r.ok:
            continue
        for d, e in r.errors.items():
            groups.setdefault((r.type, r.boundary, r.N, d), []).append(e)
    out = []
    for key in sorted(groups):
        vals = np.sort(np.asarray(groups[key]))  # fixed order keeps sums reproducible
        out.append(Aggregate(*key, count=len(vals), mean=float(math.fsum(vals) / len(vals)),
                             max=float(vals.max())))
    return out


def fit_slopes(aggs: Iterable[Aggregate], stat: str = "mean") -> dict:
    """Least-squares slope of log(error) against log(N) per (type, boundary, descriptor).

    Ladders with a single N (or any non-positive error) get no slope.
    """
    series: dict = {}
    for a in aggs:
        series.setdefault((a.type, a.boundary, a.descriptor), []).append((a.N, getattr(a, stat)))
    out = {}
    for key, pts in sorted(series.items()):
        pts.sort()
        N = np.array([p[0] for p in pts], dtype=float)
        e = np.array([p[1] for p in pts], dtype=float)
        if len(pts) < 2 or np.any(e <= 0):
            out[key] = None
            continue
        out[key] = float(np.polyfit(np.log(N), np.log(e), 1)[0])
    return out
