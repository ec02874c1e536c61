"""Command line entry point: run, validate, plot."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import UsageError
from .plotting import emit_plot, series_from_csv
from .runner import ConfigError, load_config, run_experiment, validate_config

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermolim", description="Ergodic-theorem experiments on Cayley graphs")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--seed", type=int, default=None)
    val = sub.add_parser("validate", help="check a config against the schema")
    val.add_argument("config")
    plot = sub.add_parser("plot", help="render a CSV as SVG")
    plot.add_argument("csv")
    plot.add_argument("--kind", choices=("step", "line"), default="line")
    plot.add_argument("--out", required=True)
    plot.add_argument("--x", default=None)
    plot.add_argument("--y", default=None)
    plot.add_argument("--group-by", default=None)
    plot.add_argument("--log", choices=("x", "y", "xy"), default=None)
    plot.add_argument("--title", default="")
    return p


def _config_error(exc: ConfigError) -> int:
    print(json.dumps({"error": "config", "pointer": exc.pointer, "message": exc.detail}), file=sys.stderr)
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        try:
            validate_config(load_config(args.config))
        except ConfigError as exc:
            return _config_error(exc)
        print("ok")
        return EXIT_OK
    if args.command == "run":
        try:
            manifest = run_experiment(load_config(args.config), args.workers, args.out, args.seed)
        except ConfigError as exc:
            return _config_error(exc)
        for f in manifest.data["failures"]:
            print(f"task {f['index']} ({f['label']}) failed: {f['error']}", file=sys.stderr)
        print(f"{manifest.data['experiment']}: {len(manifest.data['outputs'])} files, status {manifest.status}")
        return manifest.exit_code
    try:
        series = series_from_csv(Path(args.csv).read_text(), args.kind, args.x, args.y, args.group_by)
        log = args.log or ""
        svg = emit_plot(series, args.kind, "x" in log, "y" in log, args.title,
                        x_label=args.x or "x", y_label=args.y or "y")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    Path(args.out).write_text(svg)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
