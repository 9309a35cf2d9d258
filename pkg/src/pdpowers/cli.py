"""Command-line interface: run experiments, validate configs, emit plots."""

import argparse
import sys
from pathlib import Path

from .harness import (ConfigError, RunConfig, load_config, run_experiment,
                      validate_config)
from .plots import emit_plot


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdpowers",
        description="Primal-dual policy optimization simulator for linear "
                    "mixture constrained MDPs with adversarial rewards.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the multi-seed experiment")
    run.add_argument("--config", required=True, help="path to the config file")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--workers", type=int, default=None,
                     help="parallel seed workers (default: one per seed)")
    run.add_argument("--diagnostics", choices=("on", "off"), default=None,
                     help="override inline runtime assertions")

    plot = sub.add_parser("plot", help="render SVG panels from aggregates")
    plot.add_argument("--in", dest="in_dir", required=True,
                      help="directory holding aggregate CSVs")
    plot.add_argument("--out", required=True, help="output directory")

    val = sub.add_parser("validate", help="check a config and its instance")
    val.add_argument("--config", required=True, help="path to the config file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            diagnostics = None if args.diagnostics is None \
                else args.diagnostics == "on"
            summary = run_experiment(cfg, Path(args.out),
                                     workers=args.workers,
                                     diagnostics=diagnostics)
            print((summary.out_dir / "summary.txt").read_text(), end="")
            return 0 if summary.ok else 1
        if args.command == "plot":
            for path in emit_plot(args.in_dir, args.out):
                print(f"wrote {path}")
            return 0
        if args.command == "validate":
            cfg = load_config(args.config)
            report = validate_config(cfg)
            print(report)
            return 0 if report.passed else 1
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
