"""Standalone task benchmark executable.

    taskbench --name ID --cores N --cpuwork W --memwork M --f F \
              --input PATH... --output PATH:BYTES... --seed S --report PATH
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..units import parse_bytes
from ..wfspec import TaskParams, is_tenth
from .core import PhaseError, run_task
from .kernels import DEFAULT_ARRAY_BYTES


def _output(text: str) -> tuple[str, int]:
    path, sep, size = text.rpartition(":")
    if not sep or not path:
        raise argparse.ArgumentTypeError(f"expected PATH:BYTES, got {text!r}")
    try:
        return path, parse_bytes(size)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fraction(text: str) -> float:
    value = float(text)
    if not is_tenth(value):
        raise argparse.ArgumentTypeError(f"f must be a multiple of 0.1 in [0, 1], got {text}")
    return value


def _nonneg(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def build_parser(prog: str = "taskbench", add_help: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=prog, description="Run one three-phase benchmark task.", add_help=add_help)
    p.add_argument("--name", default="task")
    p.add_argument("--cores", type=int, default=1)
    p.add_argument("--cpuwork", type=_nonneg, default=0.0)
    p.add_argument("--memwork", type=_nonneg, default=0.0)
    p.add_argument("--f", type=_fraction, default=1.0)
    p.add_argument("--input", nargs="*", action="extend", default=[], metavar="PATH")
    p.add_argument("--output", nargs="*", action="extend", default=[], type=_output, metavar="PATH:BYTES")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the JSON report here (default: stdout)")
    p.add_argument("--array-bytes", type=parse_bytes, default=DEFAULT_ARRAY_BYTES)
    p.add_argument(
        "--oversubscribe",
        action="store_true",
        help="allow more core groups than usable cores (groups then share cores)",
    )
    return p


def run(args: argparse.Namespace) -> int:
    params = TaskParams(cores=args.cores, cpuwork=args.cpuwork, memwork=args.memwork, f=args.f)
    status = 0
    try:
        report = run_task(
            params,
            inputs=args.input,
            outputs=args.output,
            seed=args.seed,
            name=args.name,
            array_bytes=args.array_bytes,
            oversubscribe=args.oversubscribe,
        )
    except PhaseError as exc:
        print(f"taskbench: {exc}", file=sys.stderr)
        report = exc.report
        status = 1
    text = json.dumps(report.to_dict(), indent=2)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return status


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
