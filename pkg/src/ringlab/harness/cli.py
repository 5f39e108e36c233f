"""Command line entry point: ``ringlab <experiment> --config file.json``."""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment

EXIT_PASS, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ringlab", description="Symmetry experiments for Δu = f(u) on rings.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config file (missing keys take defaults)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-key override with a JSON value, e.g. --set geometry.R=3")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress per-stage output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"output_dir={args.out}")
    try:
        cfg = load_config(args.config, overrides, args.experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run_experiment(cfg)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for s in manifest.stages:
            line = f"{s['status'].upper():7s} {s['name']}"
            if "error" in s:
                line += f": {s['error']}"
            print(line)
        print(f"{'PASS' if manifest.passed else 'FAIL'} {cfg.experiment} -> {cfg.output_dir} "
              f"({manifest.wall_time:.1f} s)")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
