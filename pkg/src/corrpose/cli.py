"""Command line entry point: ``corrpose run|summarize|gen-model``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, PoseError
from .harness import ExperimentConfig, emit_summary, read_rows, run_experiment, summary_csv, summary_table
from .scene import builtin_model, save_model

log = logging.getLogger("corrpose")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrpose", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep from a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--seed", type=int, help="override the config's master seed")
    run.add_argument("--out", type=Path, help="rows CSV path (default: config 'output')")
    run.add_argument("--summary", type=Path, help="also write the summary CSV here")
    run.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--timing", action="store_true",
                     help="add a wall_time_ms column (makes the CSV run-dependent)")

    summ = sub.add_parser("summarize", help="aggregate a rows CSV")
    summ.add_argument("rows", type=Path)
    summ.add_argument("--out", type=Path, help="write the summary CSV here")

    gen = sub.add_parser("gen-model", help="write a built-in model as an xyz text file")
    gen.add_argument("shape", choices=["tetra", "box-grid", "sphere"])
    gen.add_argument("n", type=int, nargs="?", help="grid points per axis (box-grid) or point count (sphere)")
    gen.add_argument("--out", type=Path, required=True)
    return parser


def _run(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    result = run_experiment(config, out=args.out, threads=args.threads, timing=args.timing)
    print(summary_table(result.summary))
    if args.summary:
        args.summary.write_text(summary_csv(result.summary))
    return 0


def _summarize(args) -> int:
    try:
        rows = read_rows(args.rows)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.rows}: {exc}") from exc
    summary = emit_summary(rows)
    print(summary_table(summary))
    if args.out:
        args.out.write_text(summary_csv(summary))
    return 0


def _gen_model(args) -> int:
    model = builtin_model(args.shape, args.n)
    save_model(model, args.out)
    print(f"wrote {model.name}: {len(model)} vertices, diameter {model.diameter:.6f} m -> {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    handler = {"run": _run, "summarize": _summarize, "gen-model": _gen_model}[args.command]
    try:
        return handler(args)
    except (PoseError, ValueError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
