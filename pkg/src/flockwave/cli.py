"""Command-line entry point: validate, spectrum, classify, simulate, characterize, sweep."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .characterize import (
    CharacterizationError,
    horizon,
    measure_type1,
    measure_type2,
    predict_type1,
    predict_type2,
    relative_error,
)
from .coupling import FlockSpec, SpecError, load_spec, parse_spec, serialize_spec, validate_config
from .simulate import IntegrationError, IntegratorOptions, Trajectory, integrate
from .spectrum import SpectrumError, eigencurves, signal_velocities
from .stability import EigenSolveError, SolutionType, classify, necessary_criteria
from .sweep import (
    DESCRIPTORS,
    aggregate,
    build_pool,
    compare_population,
    error_scaling_experiment,
    fit_slopes,
    load_plan,
)

log = logging.getLogger("flockwave")

_MODULE_OF = {
    SpecError: "coupling_model",
    SpectrumError: "spectrum",
    EigenSolveError: "stability",
    IntegrationError: "simulate",
    CharacterizationError: "characterize",
}


class CliError(RuntimeError):
    def __init__(self, module: str, message: str, code: int = 1):
        super().__init__(message)
        self.module = module
        self.code = code


# ---------------------------------------------------------------- output helpers


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class Artifact:
    """CSV file with a ``#`` metadata header followed by a plain CSV body."""

    def __init__(self, outdir: Path, name: str, meta: dict):
        self.path = outdir / name
        self.meta = meta

    def write(self, header: list[str], rows) -> Path:
        with open(self.path, "w", newline="", encoding="utf-8") as fh:
            for k, v in self.meta.items():
                fh.write(f"# {k}: {v if isinstance(v, str) else json.dumps(v, sort_keys=True)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(x) for x in row])
        return self.path


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _meta(args, source_text: str, **extra) -> dict:
    out = {"tool": f"flockwave {__version__}", "command": args.command, "input_sha256": _digest(source_text)}
    out.update(extra)
    return out


def _outdir(args) -> Path:
    p = Path(args.out)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("io", f"cannot create output directory {p}: {exc}") from None
    return p


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc}") from None


def _spec(args) -> tuple[FlockSpec, str]:
    text = _read(args.spec)
    spec = parse_spec(text)
    changes = {}
    if getattr(args, "N", None) is not None:
        changes["N"] = args.N
    if getattr(args, "boundary", None) is not None:
        changes["boundary"] = args.boundary
    return (spec.replace(**changes) if changes else spec), text


def _integrator(args, t_max: float) -> IntegratorOptions:
    if args.dt is not None:
        return IntegratorOptions(t_max=t_max, method="rk4", dt=args.dt, n_out=args.n_out)
    tol = args.tol if args.tol is not None else 1e-8
    return IntegratorOptions(t_max=t_max, atol=tol, rtol=tol, n_out=args.n_out)


def _prediction(spec: FlockSpec):
    p = spec.config.reduced
    if p.discriminant < 0:
        return None, None
    cls = classify(signal_velocities(p))
    v = signal_velocities(p)
    if cls.type is SolutionType.TYPE_I:
        return cls, predict_type1(v, spec.N, float(spec.v0))
    if cls.type is SolutionType.TYPE_II:
        return cls, predict_type2(v, spec.N, float(spec.v0))
    return cls, None


# ---------------------------------------------------------------- subcommands


def cmd_validate(args) -> int:
    text = _read(args.spec)
    spec = parse_spec(text, check=False)
    report = validate_config(spec.config)
    if report.ok:
        print(f"ok: {args.spec} is a valid decentralized configuration "
              f"({'exact' if report.exact else 'floating-point'} check)")
        return 0
    for v in report.violations:
        print(f"invalid: {v}")
    raise CliError("coupling_model", "; ".join(str(v) for v in report.violations))


def cmd_spectrum(args) -> int:
    spec, text = _spec(args)
    ec = eigencurves(spec.config.reduced, args.samples)
    out = _outdir(args)
    rows = ([m, s.phi, s.lambda_x.real, s.lambda_x.imag, s.lambda_v.real, s.lambda_v.imag,
             s.nu_plus.real, s.nu_plus.imag, s.nu_minus.real, s.nu_minus.imag]
            for m, s in enumerate(ec.samples()))
    path = Artifact(out, "spectrum.csv", _meta(args, text, samples=args.samples)).write(
        ["m", "phi", "lambda_x_re", "lambda_x_im", "lambda_v_re", "lambda_v_im",
         "nu_plus_re", "nu_plus_im", "nu_minus_re", "nu_minus_im"], rows)
    print(f"spectral margin: {ec.margin:.6g}")
    print(f"wrote {path}")
    return 0


def cmd_classify(args) -> int:
    spec, text = _spec(args)
    p = spec.config.reduced
    crit = necessary_criteria(p, spec.config)
    margin = eigencurves(p, args.samples).margin
    rows = [[c.id, c.statement, c.value, c.margin, c.satisfied] for c in crit.conditions]
    print(f"{'cond':<5} {'value':>14} {'margin':>14}  ok   statement")
    for c in crit.conditions:
        print(f"{c.id:<5} {c.value:>14.6g} {c.margin:>14.6g}  {'yes' if c.satisfied else 'NO ':<4} {c.statement}")
    print(f"all conditions: {'pass' if crit.overall else 'fail (' + ', '.join(crit.failed) + ')'}")
    print(f"spectral margin ({args.samples} samples): {margin:.6g}")
    summary = {"criteria_overall": crit.overall, "spectral_margin": margin}
    if p.discriminant >= 0:
        v = signal_velocities(p)
        cls = classify(v)
        print(f"c+ = {v.c_plus:.10g}, c- = {v.c_minus:.10g}")
        label = f"Type{cls.type.value}" if cls.type is not SolutionType.DEGENERATE else "Degenerate"
        if cls.type is SolutionType.TYPE_I:
            label += f" (attenuating: {'yes' if cls.attenuating else 'no'})"
        print(f"type: {label}")
        summary.update(c_plus=v.c_plus, c_minus=v.c_minus, type=cls.type.value,
                       attenuating=cls.attenuating)
    else:
        print("type: undefined (condition (v) fails, velocities are complex)")
        summary.update(type="undefined")
    rows += [[k, "", v, "", ""] for k, v in summary.items()]
    path = Artifact(_outdir(args), "classify.csv", _meta(args, text, samples=args.samples)).write(
        ["id", "statement", "value", "margin", "satisfied"], rows)
    print(f"wrote {path}")
    return 0


def _default_t_max(spec: FlockSpec) -> float:
    _, pred = _prediction(spec)
    return horizon(pred) if pred is not None else 10.0 * spec.N


def cmd_simulate(args) -> int:
    spec, _ = _spec(args)
    t_max = args.t_max if args.t_max is not None else _default_t_max(spec)
    opts = _integrator(args, t_max)
    agents = None if args.all_agents else sorted({1, spec.N // 2, spec.N})
    t0 = time.perf_counter()
    tr = integrate(spec, opts, agents=agents)
    elapsed = time.perf_counter() - t0
    meta = _meta(args, serialize_spec(spec), options=opts.describe(), N=spec.N,
                 boundary=spec.boundary.value, status=tr.status)
    meta["spec"] = serialize_spec(spec).strip().replace("\n", " | ")
    body = np.column_stack([tr.times, tr.z])
    path = Artifact(_outdir(args), "trajectory.csv", meta).write(
        ["t"] + [f"z_{a}" for a in tr.agents], body.tolist())
    print(f"integrated N={spec.N} to t={tr.times[-1]:.6g} with {opts.method} "
          f"({tr.steps} steps, {elapsed:.2f} s){' [truncated: ' + tr.status + ']' if tr.truncated else ''}")
    print(f"wrote {path}")
    return 0


def _load_trajectory(path: str, spec: FlockSpec) -> Trajectory:
    text = _read(path)
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise CliError("characterize", f"{path} holds no samples")
    header = lines[0].split(",")
    if header[0] != "t" or not all(h.startswith("z_") for h in header[1:]):
        raise CliError("characterize", f"{path}: expected columns t, z_<agent>..., got {header[:4]}")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    agents = np.array([int(h[2:]) for h in header[1:]])
    if spec.N not in agents:
        raise CliError("characterize", f"{path} does not record the last agent z_{spec.N}")
    z = data[:, 1:]
    return Trajectory(times=data[:, 0], z=z, zdot=np.full_like(z, np.nan), agents=agents, spec=spec,
                      options=IntegratorOptions(t_max=float(data[-1, 0])))


def cmd_characterize(args) -> int:
    spec, text = _spec(args)
    cls, pred = _prediction(spec)
    if pred is None:
        kind = "undefined" if cls is None else cls.type.value
        raise CliError("characterize", f"no quantitative prediction for solution type {kind}")
    if args.trajectory:
        tr = _load_trajectory(args.trajectory, spec)
    else:
        t_max = args.t_max if args.t_max is not None else horizon(pred)
        tr = integrate(spec, _integrator(args, t_max), agents=[spec.N])
    if tr.truncated:
        raise CliError("simulate", f"trajectory diverged ({tr.status}); nothing to characterize")
    meas = measure_type1(tr) if cls.type is SolutionType.TYPE_I else measure_type2(tr, pred)
    p, m = pred.descriptors(), meas.descriptors()
    err = relative_error(m, p)
    rows = [[k, p[k], m[k], err[k]] for k in p]
    print(f"Type {cls.type.value}, N={spec.N}, boundary={spec.boundary.value}")
    print(f"{'descriptor':<10} {'predicted':>14} {'measured':>14} {'rel.error':>10}")
    for k, pv, mv, ev in rows:
        print(f"{k:<10} {pv:>14.6g} {mv:>14.6g} {ev:>10.4g}")
    path = Artifact(_outdir(args), "characterize.csv", _meta(args, text, N=spec.N, type=cls.type.value,
                                                            boundary=spec.boundary.value)).write(
        ["descriptor", "predicted", "measured", "relative_error"], rows)
    print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    text = _read(args.plan)
    plan = load_plan(args.plan)
    out = _outdir(args)
    meta = _meta(args, text, seed=args.seed, plan=plan.describe())
    if args.mode in ("compare", "both"):
        t0 = time.perf_counter()
        rep = compare_population(plan, args.count, args.seed, N=args.N or 100,
                                 boundary=args.boundary or "fixed_interaction")
        rows = [[d.id, d.in_criteria, d.resolved_at if d.resolved_at else "", d.category, d.type,
                 d.margin, " ".join(d.failed), json.dumps({str(k): v for k, v in d.max_real.items()})]
                for d in rep.items]
        Artifact(out, "discrepancies.csv", dict(meta, counts=rep.counts())).write(
            ["config_id", "in_criteria_set", "resolved_at_N", "category", "type", "circle_margin",
             "failed_conditions", "line_max_real"], rows)
        print(f"compare: {json.dumps(rep.counts(), sort_keys=True)} ({time.perf_counter() - t0:.1f} s)")
    if args.mode in ("scaling", "both"):
        pool = build_pool(plan, "I", args.seed) + build_pool(plan, "II", args.seed + 1)
        ladder = plan.ladder if args.N is None else (args.N,)
        boundaries = plan.boundaries if args.boundary is None else (args.boundary,)
        recs = error_scaling_experiment(pool, ladder, boundaries, rtol=plan.rtol, atol=plan.atol,
                                        workers=args.workers)
        cols = sorted({d for ds in DESCRIPTORS.values() for d in ds})
        Artifact(out, "records.csv", meta).write(
            ["config_id", "type", "N", "boundary", "status"] + [f"err_{c}" for c in cols],
            [[r.config_id, r.type, r.N, r.boundary, r.status] + [r.errors.get(c, "") for c in cols]
             for r in recs])
        Artifact(out, "timings.csv", meta).write(
            ["config_id", "N", "boundary", "wall_time_s"],
            [[r.config_id, r.N, r.boundary, r.wall_time] for r in recs])
        aggs = aggregate(recs)
        Artifact(out, "aggregates.csv", meta).write(
            ["type", "boundary", "N", "descriptor", "count", "mean", "max"],
            [[a.type, a.boundary, a.N, a.descriptor, a.count, a.mean, a.max] for a in aggs])
        slopes = fit_slopes(aggs)
        Artifact(out, "slopes.csv", meta).write(
            ["type", "boundary", "descriptor", "mean_error_slope"],
            [[*k, "" if v is None else v] for k, v in slopes.items()])
        for (t, b, d), s in slopes.items():
            print(f"Type {t:<2} {b:<18} {d:<6} slope {'n/a' if s is None else f'{s:+.3f}'}")
        print(f"{sum(not r.ok for r in recs)} of {len(recs)} runs excluded")
    print(f"wrote results to {out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flockwave", description=__doc__)
    ap.add_argument("--version", action="version", version=f"flockwave {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, spec=True):
        if spec:
            p.add_argument("spec", help="YAML flock specification")
        p.add_argument("--out", default="flockwave-out", help="output directory")
        p.add_argument("--N", type=int, default=None, help="override the agent count")
        p.add_argument("--boundary", choices=["fixed_interaction", "fixed_mass", "periodic"], default=None)

    def integ(p):
        p.add_argument("--t-max", type=float, default=None, help="simulation length")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--dt", type=float, default=None, help="fixed-step RK4 with this step")
        g.add_argument("--tol", type=float, default=None, help="adaptive DOPRI5 tolerance (default 1e-8)")
        p.add_argument("--n-out", type=int, default=4096, help="number of output intervals")

    p = sub.add_parser("validate", help="check decentralization of a spec")
    p.add_argument("spec")
    p.add_argument("--out", default="flockwave-out")
    p.set_defaults(func=cmd_validate)

    for name, fn, hlp in (("spectrum", cmd_spectrum, "sample the circle eigencurves"),
                          ("classify", cmd_classify, "criteria, spectral margin and solution type")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.add_argument("--samples", type=int, default=1024)
        p.set_defaults(func=fn)

    p = sub.add_parser("simulate", help="integrate the leader-driven flock")
    common(p)
    integ(p)
    p.add_argument("--all-agents", action="store_true", help="record every agent, not just 1, N/2, N")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("characterize", help="predicted vs measured transient descriptors")
    common(p)
    integ(p)
    p.add_argument("--trajectory", default=None, help="trajectory CSV from `simulate` (default: simulate now)")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("sweep", help="population comparison and error-scaling experiment")
    p.add_argument("plan", help="YAML sweep plan")
    common(p, spec=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["scaling", "compare", "both"], default="scaling")
    p.add_argument("--count", type=int, default=1000, help="population size for --mode compare")
    p.add_argument("--workers", type=int, default=None, help="process count (capped by FLOCKWAVE_THREADS)")
    p.set_defaults(func=cmd_sweep)
    return ap


def _fail(module: str, message: str, code: int = 1) -> int:
    print(json.dumps({"error": {"module": module, "message": message}}), file=sys.stderr)
    return code


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.module, str(exc), exc.code)
    except tuple(_MODULE_OF) as exc:
        mod = next(m for cls, m in _MODULE_OF.items() if isinstance(exc, cls))
        return _fail(mod, f"{mod}: {exc}")
    except ValueError as exc:
        return _fail("input", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
