"""Command line entry point.

One subcommand per experiment; a run writes a JSON report (and optionally a
CSV table) and exits 0 only when every checked tolerance passed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    emit_csv,
    parse_config_file,
    run,
)

_EPILOG = """\
config file keys (flat `section.key = value` lines, # comments):
  grid.n  grid.width  grid.height  grid.norm {l1,l2,linf}  grid.weight
  solver.p  solver.tol_gap  solver.tol_admissibility
  solver.max_outer_iters  solver.max_inner_iters
  experiment.levels  experiment.n_sweep  experiment.reference
  experiment.rel_tol  experiment.tol_reciprocity
  experiment.ratio_min  experiment.ratio_max
  experiment.gradient  experiment.density
Defaults are echoed into every report under "config".
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modrecip",
        description=(
            "p-modulus of connecting and separating curve families on weighted "
            "planar grids, with reciprocity, sharpness, coarea and convergence "
            "experiments"
        ),
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", help="path to the flat key-value config file")
        cmd.add_argument("--out", help="path for the JSON report")
        cmd.add_argument("--csv", help="path for the CSV table")
        cmd.add_argument("--seed", type=int, default=0, help="seed echoed into the report")
        cmd.add_argument("--workers", type=int, default=1, help="worker pool size for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        mapping = parse_config_file(args.config) if args.config else {}
        config = ExperimentConfig.from_mapping(args.experiment, mapping)
        config = replace(config, seed=args.seed, workers=max(1, args.workers))
        config.validate()
    except (ConfigError, OSError) as exc:
        print(f"modrecip: config error: {exc}", file=sys.stderr)
        return 2

    report = run(config)
    for row in report.results:
        status = "pass" if row["passed"] else "FAIL"
        ref = "" if row["reference"] is None else f" reference={row['reference']:.6g}"
        print(f"[{status}] {config.experiment} {row['instance']}: value={row['value']}{ref}")
    if args.out:
        report.write_json(args.out)
        print(f"report written to {args.out}")
    if args.csv:
        emit_csv(report, args.csv)
        print(f"csv written to {args.csv}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
