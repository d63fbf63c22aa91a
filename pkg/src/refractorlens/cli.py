"""Command-line front end.

Subcommands
-----------
solve    run coordinate descent on uniform or image-derived targets
refine   solve, then quasi-Newton refinement (optionally multiresolution)
render   forward-trace a coefficient CSV and write the achieved image
export   write the lens surface as an OBJ or ASCII STL mesh
verify   run the randomized property suites
scaling  measure how the adjustment count grows with the target count

Exit codes: 0 success, 1 numerical failure, 2 usage/configuration error.
Every command writes a manifest.json describing the run next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import errors
from .pgm import read_pgm, write_pgm
from .pipeline import (TargetLattice, build_lattices, export_mesh,
                       forward_render, image_to_targets)
from .refine import RefineConfig, multires_schedule
from .refractor import TargetSpec
from .solver import SolverConfig, solve
from .suites import SUITES

USAGE_ERROR = 2
NUMERICAL_ERROR = 1


@dataclass
class RunManifest:
    command: str
    kappa: float = 0.5
    n: int = 1
    M: int = 50
    delta: float | None = None
    epsilon: float | None = None
    skip_first: bool = False
    schedule: list = field(default_factory=list)
    seed: int = 0
    workers: int = 1
    image: str | None = None
    out: str = "."
    extra: dict = field(default_factory=dict)

    def write(self, out_dir: Path):
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _coeff_rows(lattice: TargetLattice, b):
    rs = np.arange(-lattice.n, lattice.n + 1, 2)
    rows = []
    i = 0
    for r in rs:
        for rp in rs:
            rows.append((i, int(r), int(rp), float(b[i])))
            i += 1
    return rows


def write_coefficients(path, lattice: TargetLattice, b):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "r", "rp", "b_i"])
        for idx, r, rp, bi in _coeff_rows(lattice, b):
            w.writerow([idx, r, rp, f"{bi:.17g}"])


def read_coefficients(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["b_i"]) for r in rows])


def write_trace(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "j", "b_before", "b_after", "G_achieved"])
        for row in history:
            w.writerow(row)


def _targets_for(args, lattice: TargetLattice):
    if args.image:
        img = read_pgm(args.image)
        return image_to_targets(img, lattice, coverage_fraction=args.coverage)
    n = lattice.size
    targets = TargetSpec.uniform(lattice.directions)
    return targets, np.ones(n, dtype=bool)


def _solver_config(args, targets) -> SolverConfig:
    n = targets.n_targets
    eps = args.eps if args.eps is not None else 1.0 / (10.0 * n)
    if args.delta is not None:
        delta = args.delta
    else:
        delta = eps if args.skip_first else eps / n
    return SolverConfig(delta=delta, epsilon=eps, skip_first=args.skip_first,
                        max_sweeps=args.max_sweeps)


def cmd_solve(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lattice, source = build_lattices(args.n, args.M, args.kappa)
    targets, _ = _targets_for(args, lattice)
    cfg = _solver_config(args, targets)
    report = solve(targets, source.as_grid(), args.kappa, cfg)
    write_coefficients(out / "coefficients.csv", lattice, report.final_b)
    write_trace(out / "trace.csv", report.history)
    summary = (
        f"targets N={targets.n_targets} kappa={args.kappa} M={args.M}\n"
        f"err={report.err:.9g} epsilon={cfg.epsilon:.9g} converged={report.converged}\n"
        f"sweeps={report.sweeps} adjustments={report.component_adjustments} "
        f"bound={report.bound_n0:.6g} evaluations={report.evaluations}\n"
    )
    (out / "report.txt").write_text(summary)
    RunManifest(command="solve", kappa=args.kappa, n=args.n, M=args.M,
                delta=cfg.delta, epsilon=cfg.epsilon, skip_first=args.skip_first,
                seed=args.seed, workers=args.workers, image=args.image,
                out=str(out)).write(out)
    print(summary, end="")
    return 0 if report.converged else NUMERICAL_ERROR


def cmd_refine(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schedule = args.schedule or [args.n]
    n_final = schedule[-1]
    lattice, source = build_lattices(n_final, args.M, args.kappa)
    grid = source.as_grid()

    img = read_pgm(args.image) if args.image else None

    def targets_for(n):
        lat = TargetLattice.build(n)
        if img is not None:
            return image_to_targets(img, lat, coverage_fraction=args.coverage)[0]
        return TargetSpec.uniform(lat.directions)

    def stage_tol(n, targets):
        if args.eps is not None:
            return args.eps
        if img is not None:
            lat = TargetLattice.build(n)
            _, mask = image_to_targets(img, lat, coverage_fraction=args.coverage)
            return float(targets.intensities[mask].min()) / 10.0
        return 1.0 / (10.0 * targets.n_targets)

    cfg = RefineConfig(tolerance=stage_tol(n_final, targets_for(n_final)),
                       max_evaluations=args.max_evals)
    report = multires_schedule(targets_for, schedule, args.kappa, grid, cfg,
                               stage_tolerance=stage_tol)
    write_coefficients(out / "coefficients.csv", lattice, report.final_b)
    with open(out / "residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "max_residual", "evaluations"])
        for row in report.history:
            w.writerow(row)
    summary = (f"schedule={schedule} err={report.err:.9g} "
               f"converged={report.converged} evaluations={report.evaluations}\n")
    (out / "report.txt").write_text(summary)
    RunManifest(command="refine", kappa=args.kappa, n=n_final, M=args.M,
                epsilon=args.eps, schedule=schedule, seed=args.seed,
                workers=args.workers, image=args.image, out=str(out)).write(out)
    print(summary, end="")
    return 0 if report.converged else NUMERICAL_ERROR


def cmd_render(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lattice, source = build_lattices(args.n, args.M, args.kappa)
    targets, _ = _targets_for(args, lattice)
    b = read_coefficients(args.coeffs)
    if b.size != lattice.size:
        print(f"coefficient count {b.size} does not match n={args.n}", file=sys.stderr)
        return USAGE_ERROR
    image, table = forward_render(b, targets, lattice, source.as_grid(), args.kappa)
    write_pgm(out / "render.pgm", image,
              comments=[f"n={args.n}", f"kappa={args.kappa}", f"err={table['max']:.9g}"])
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "prescribed", "achieved", "relative_error"])
        for i in range(targets.n_targets):
            w.writerow([i, f"{table['prescribed'][i]:.17g}",
                        f"{table['achieved'][i]:.17g}",
                        f"{table['relative_errors'][i]:.17g}"])
    RunManifest(command="render", kappa=args.kappa, n=args.n, M=args.M,
                image=args.image, out=str(out),
                extra={"coeffs": args.coeffs}).write(out)
    print(f"max relative error {table['max']:.6g}, median {table['median']:.6g}")
    return 0


def cmd_export(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lattice, source = build_lattices(args.n, args.M, args.kappa)
    targets, _ = _targets_for(args, lattice)
    b = read_coefficients(args.coeffs)
    if b.size != lattice.size:
        print(f"coefficient count {b.size} does not match n={args.n}", file=sys.stderr)
        return USAGE_ERROR
    path = out / f"lens.{args.format}"
    export_mesh(b, targets, source, args.kappa, args.format, path)
    RunManifest(command="export", kappa=args.kappa, n=args.n, M=args.M,
                out=str(out), extra={"coeffs": args.coeffs,
                                     "format": args.format}).write(out)
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        kwargs = {"trials": args.trials, "seed": args.seed}
        ok, failures, trials = SUITES[name](**kwargs)
        status = "pass" if ok else "FAIL"
        print(f"{name}: {status} ({trials} trials, {len(failures)} failures)")
        if not ok:
            failed = True
            for f in failures[:5]:
                print(f"  {f}")
    return NUMERICAL_ERROR if failed else 0


def cmd_scaling(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        lattice, source = build_lattices(n, args.M, args.kappa)
        targets = TargetSpec.uniform(lattice.directions)
        eps = 1.0 / (10.0 * targets.n_targets)
        cfg = SolverConfig(delta=eps, epsilon=eps, skip_first=True)
        t0 = time.perf_counter()
        report = solve(targets, source.as_grid(), args.kappa, cfg)
        tau = time.perf_counter() - t0
        rows.append((targets.n_targets, report.component_adjustments, tau))
        print(f"N={targets.n_targets} nu={report.component_adjustments} tau={tau:.3f}s")
    with open(out / "scaling.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "nu", "tau_seconds"])
        for row in rows:
            w.writerow([row[0], row[1], f"{row[2]:.6f}"])
    ns = np.array([r[0] for r in rows], dtype=float)
    nus = np.array([max(r[1], 1) for r in rows], dtype=float)
    exponent = float(np.polyfit(np.log(ns), np.log(nus), 1)[0])
    (out / "fit.txt").write_text(f"exponent={exponent:.6f}\n")
    RunManifest(command="scaling", kappa=args.kappa, M=args.M, out=str(out),
                extra={"n_min": args.n_min, "n_max": args.n_max,
                       "exponent": exponent}).write(out)
    print(f"fitted exponent {exponent:.3f}")
    return 0


def _add_common(p):
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--M", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1,
                   help="grid parallelism hint (tracing is vectorized)")
    p.add_argument("--out", default="out")
    p.add_argument("--image", default=None, help="target PGM image path")
    p.add_argument("--coverage", type=float, default=0.30,
                   help="certification mask fraction for image targets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refractorlens",
        description="Far-field freeform lens design by supporting semi-ellipsoids")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="coordinate-descent solve")
    _add_common(p)
    p.add_argument("--uniform", action="store_true",
                   help="uniform target intensities (default when no --image)")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--skip-first", dest="skip_first", action="store_true")
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=100_000)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("refine", help="solve, then quasi-Newton refinement")
    _add_common(p)
    p.add_argument("--schedule", type=lambda s: [int(x) for x in s.split(",")],
                   default=None, help="comma-separated lattice schedule, e.g. 2,4,6")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--max-evals", dest="max_evals", type=int, default=20_000)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("render", help="forward-render a coefficient CSV")
    _add_common(p)
    p.add_argument("--coeffs", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export", help="export the lens surface mesh")
    _add_common(p)
    p.add_argument("--coeffs", required=True)
    p.add_argument("--format", choices=["obj", "stl"], default="obj")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="run the randomized property suites")
    p.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scaling", help="adjustment-count growth study")
    _add_common(p)
    p.add_argument("--n-min", dest="n_min", type=int, default=1)
    p.add_argument("--n-max", dest="n_max", type=int, default=4)
    p.set_defaults(func=cmd_scaling)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return USAGE_ERROR
    except (errors.ConfigError, errors.DimensionMismatch,
            errors.UnsupportedFormat, errors.AllDark,
            errors.TotalReflectionRisk, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (errors.NoFeasibleStep, errors.SweepCapExceeded,
            errors.DegenerateStart, errors.StageError,
            errors.DomainViolation) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
