"""Command-line entry point: ``wlseno run | converge | stability``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from wlseno import harness, stability
from wlseno.config import read_config

__all__ = ["build_parser", "main"]


def _levels(text: str) -> list[int]:
    try:
        levels = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from exc
    if len(levels) < 3:
        raise argparse.ArgumentTypeError("need at least three levels")
    return levels


def _config(args):
    cfg = read_config(args.config)
    return cfg.with_overrides(degree=args.degree, cfl=args.cfl, t_final=args.t_final)


def _cmd_run(args) -> int:
    cfg = _config(args)
    res = harness.run_preset(args.preset, args.resolution, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if res.solution is not None:
        harness.write_solution_csv(res, out / f"{args.preset}-solution.csv")
    summary = harness.result_summary(res)
    harness.write_summary(out / f"{args.preset}-summary.txt", summary)
    for k, v in summary.items():
        print(f"{k} = {harness._fmt(v)}")
    return 0 if res.passed else 1


def _cmd_converge(args) -> int:
    cfg = _config(args)
    report = harness.convergence_study(args.preset, args.levels, cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_convergence_csv(report, out / f"{args.preset}-convergence.csv")
    summary = {"preset": args.preset, "levels": ",".join(map(str, args.levels))}
    for row in report.table():
        n = row["resolution"]
        if row.get("failure"):
            summary[f"failure_{n}"] = row["failure"]
            continue
        for norm in ("linf", "l1"):
            if norm in row:
                summary[f"error_{norm}_{n}"] = row[norm]
                summary[f"slope_{norm}_{n}"] = row[f"slope_{norm}"]
    harness.write_summary(out / f"{args.preset}-convergence-summary.txt", summary)
    for k, v in summary.items():
        print(f"{k} = {harness._fmt(v)}")
    return 0 if not any(r.get("failure") for r in report.rows) else 1


def _cmd_stability(args) -> int:
    scheme = stability.five_cell_scheme() if args.scheme == "five" else stability.seven_cell_scheme()
    sigma = stability.max_cfl(scheme, args.samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "scheme": args.scheme,
        "coefficients": " ".join(f"{o}:{c}" for o, c in zip(scheme.offsets, scheme.coefficients)),
        "max_cfl": sigma,
        "real_axis_limit": stability.real_axis_limit(),
    }
    if args.emit_spectrum:
        theta, spec = stability.discrete_spectrum(scheme, args.samples)
        spec_path = out / f"spectrum-{args.scheme}.csv"
        stability.write_points_csv(spec_path, theta, spec)
        phi, roots = stability.stability_boundary(args.boundary_samples)
        bnd_path = out / "rk3-boundary.csv"
        stability.write_points_csv(bnd_path, phi, roots)
        summary["spectrum_csv"] = str(spec_path)
        summary["boundary_csv"] = str(bnd_path)
    harness.write_summary(out / f"stability-{args.scheme}-summary.txt", summary)
    for k, v in summary.items():
        print(f"{k} = {harness._fmt(v)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlseno", description="WLS-ENO finite volume benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("preset", choices=sorted(harness.PRESETS))
        p.add_argument("--degree", type=int)
        p.add_argument("--cfl", type=float)
        p.add_argument("--t-final", type=float)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--out", default="wlseno-out")

    run = sub.add_parser("run", help="run one preset at one resolution")
    common(run)
    run.add_argument("--resolution", type=int)
    run.set_defaults(func=_cmd_run)

    conv = sub.add_parser("converge", help="grid convergence study")
    common(conv)
    conv.add_argument("--levels", type=_levels, default=[32, 64, 128, 256])
    conv.add_argument("--jobs", type=int, default=1, help="levels run in parallel processes")
    conv.set_defaults(func=_cmd_converge)

    stab = sub.add_parser("stability", help="von Neumann analysis of the uniform-grid schemes")
    stab.add_argument("--scheme", choices=["five", "seven"], default="five")
    stab.add_argument("--emit-spectrum", action="store_true")
    stab.add_argument("--samples", type=int, default=4096)
    stab.add_argument("--boundary-samples", type=int, default=512)
    stab.add_argument("--out", default="wlseno-out")
    stab.set_defaults(func=_cmd_stability)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
