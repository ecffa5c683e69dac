"""``wfforge`` command line: one subcommand per stage of a benchmark study.

Exit status is 0 on success, 1 when the operation itself fails (for example
an invalid spec or a failed task) and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from pathlib import Path

from . import __version__, wfspec
from .units import parse_bytes, parse_rate

log = logging.getLogger("wfforge")

SEED_ENV = "WFFORGE_SEED"


class UsageError(Exception):
    """Flag combination argparse cannot express; reported like a parse error."""


class _VersionAction(argparse.Action):
    def __init__(self, option_strings, dest=argparse.SUPPRESS, default=argparse.SUPPRESS, help=None):
        super().__init__(option_strings, dest=dest, default=default, nargs=0, help=help)

    def __call__(self, parser, namespace, values, option_string=None):
        import numba
        import numpy

        info = {
            "name": "wfforge",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": numpy.__version__,
            "numba": numba.__version__,
        }
        print(json.dumps(info))
        parser.exit(0)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def _bytes(text: str) -> int:
    try:
        return parse_bytes(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _rate(text: str) -> float:
    try:
        value = parse_rate(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not wfspec.is_tenth(value):
        raise argparse.ArgumentTypeError(f"f must be a multiple of 0.1 in [0, 1], got {text}")
    return value


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"wfforge: {SEED_ENV} must be an integer, got {raw!r}") from None


def _emit(text: str, path: str | None) -> None:
    if path and path != "-":
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# --- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    from .recipes import GenerationRequest, generate, load_recipe

    params = wfspec.TaskParams(args.cores, args.cpuwork, args.memwork, args.f)
    bad = params.problems()
    if bad:
        raise wfspec.SpecError("; ".join(bad))
    req = GenerationRequest(load_recipe(args.recipe), args.tasks, args.footprint, params, seed=args.seed)
    spec = generate(req)
    _emit(wfspec.serialize(spec), args.output)
    log.info("generated %d tasks (requested %d)", len(spec.tasks), args.tasks)
    return 0


def cmd_validate(args) -> int:
    spec = wfspec.load(args.spec, check=False)
    report = wfspec.validate(spec)
    out = {
        "valid": report.ok,
        "violations": list(report.violations),
        "tasks": len(spec.tasks),
        "files": len(spec.files),
        "footprint_bytes": wfspec.total_footprint(spec),
    }
    _emit(_json(out), args.output)
    return 0 if report.ok else 1


def cmd_calibrate(args) -> int:
    from . import calibrate as cal

    if args.profile:
        counts = cal.ProfileCounts.from_text(Path(args.profile).read_text())
        _emit(_json({"f": cal.f_from_profile(counts)}), args.output)
        return 0
    if args.target_seconds is None:
        raise UsageError("--target-seconds is required unless --profile is given")
    fs = list(cal.SWEEP) if args.sweep else [args.f]
    target = cal.CalibrationTarget(args.target_seconds, fs[0], args.tolerance, args.max_iterations)
    if args.node_cores:
        spec = cal.LoadSpec(args.node_cores, args.cores, args.array_bytes, args.reference_loaded)
        report = cal.calibrate_under_load(target, spec, fs=fs)
        _emit(_json(report.to_dict()), args.output)
        return 0
    runner = cal.kernel_runner(args.cores, args.array_bytes, args.seed)
    fits = []
    for f in fs:
        t = cal.CalibrationTarget(args.target_seconds, f, args.tolerance, args.max_iterations)
        fit = cal.fit_work(t, runner)
        fits.append({"f": f, "cpuwork": fit.cpuwork, "memwork": fit.memwork,
                     "iterations": fit.iterations, "history": fit.history})
    out = {"T": args.target_seconds, "tolerance": args.tolerance, "cores": args.cores, "fits": fits}
    _emit(_json(out), args.output)
    return 0


def cmd_run_task(args) -> int:
    from .taskbench.__main__ import run

    return run(args)


def cmd_translate(args) -> int:
    from .runner import DEFAULT_PROGRAM, translate

    spec = wfspec.load(args.spec)
    program = tuple(args.program.split()) if args.program else DEFAULT_PROGRAM
    artifacts = translate(spec, args.format, args.seed, program, args.array_bytes, args.allow_empty)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in artifacts.items():
        (outdir / name).write_text(text, encoding="utf-8")
        print(outdir / name)
    return 0


def cmd_run(args) -> int:
    from .runner import execute_local, verify_outputs

    spec = wfspec.load(args.spec)
    workdir = args.workdir or args.global_workdir
    trace = execute_local(spec, args.cores, workdir, args.seed, args.array_bytes, args.allow_empty)
    text = _json(trace.to_dict())
    _emit(text, args.trace)
    if not trace.ok:
        failed = [t.id for t in trace.tasks if t.status == "failed"]
        print(f"wfforge run: {len(failed)} task(s) failed: {', '.join(failed[:5])}", file=sys.stderr)
        return 1
    check = verify_outputs(spec, workdir)
    for w in check.warnings:
        log.warning(w)
    if not check.ok:
        for m in check.mismatches:
            print(f"wfforge run: {m.file_id}: expected {m.expected} bytes, found {m.actual}", file=sys.stderr)
        return 1
    return 0


def cmd_estimate(args) -> int:
    from . import models

    spec = wfspec.load(args.spec)
    w_t = args.wt
    if args.costs:
        per_task = json.loads(Path(args.costs).read_text())
        missing = [t.id for t in spec.tasks if t.id not in per_task]
        if missing:
            raise models.ModelError(f"--costs lacks {len(missing)} task(s), e.g. {missing[0]}")
        w_t = {k: float(v) for k, v in per_task.items()}
    nodes = args.nodes or models.nodes_for_tasks(len(spec.tasks))
    plat = models.PlatformModel(nodes, args.cores_per_node, args.bw_read, args.bw_write)
    costs = models.task_costs(spec, w_t)
    chosen = models.MODELS if args.model == "all" else (args.model,)
    est = {m: models.add_overhead(models.estimate(spec, plat, m, costs), args.overhead) for m in chosen}
    out = {"spec": spec.name, "tasks": len(spec.tasks), "nodes": nodes, "cores_per_node": args.cores_per_node,
           "bw_read": args.bw_read, "bw_write": args.bw_write, "overhead": args.overhead, "makespan": est,
           "throughput": {m: (len(spec.tasks) / v if v > 0 else None) for m, v in est.items()}}
    _emit(_json(out), args.output)
    return 0


def cmd_analyze(args) -> int:
    from . import analyze
    from .runner import ExecutionTrace

    trace = ExecutionTrace.load(args.trace)
    other = ExecutionTrace.load(args.against) if args.against else None
    if args.metric in ("ks", "ratio") and other is None:
        raise UsageError(f"--metric {args.metric} needs --against")
    if args.metric == "throughput":
        out = {"throughput": analyze.throughput(trace), "makespan": analyze.makespan(trace), "tasks": len(trace.tasks)}
    elif args.metric == "ecdf":
        _emit(analyze.start_time_ecdf(trace).to_text(), args.output)
        return 0
    elif args.metric == "ks":
        d = analyze.ecdf_distance(analyze.start_time_ecdf(trace), analyze.start_time_ecdf(other))
        out = {"ks": d}
    else:
        out = {"ratio": analyze.makespan_ratio(trace, other)}
    _emit(_json(out), args.output)
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .models import MODELS
    from .runner import FORMATS
    from .taskbench.__main__ import build_parser as taskbench_parser

    seed_default = _default_seed()
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=seed_default, help=f"default: ${SEED_ENV} or 0")
    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("-o", "--output", help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="wfforge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action=_VersionAction, help="print version information as JSON")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--workdir", dest="global_workdir", default=".", help="default run directory")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    g = sub.add_parser("generate", parents=[seeded, out], help="build a spec from a recipe")
    g.add_argument("--recipe", required=True, help="shipped recipe name or recipe JSON path")
    g.add_argument("--tasks", type=_positive_int, required=True)
    g.add_argument("--footprint", type=_bytes, default=None, help="total bytes over all files (SI suffixes)")
    g.add_argument("--cores", type=_positive_int, default=1)
    g.add_argument("--cpuwork", type=float, default=100.0)
    g.add_argument("--memwork", type=float, default=100.0)
    g.add_argument("--f", type=_fraction, default=0.5)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", parents=[out], help="check a spec file")
    v.add_argument("--spec", required=True)
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("calibrate", parents=[seeded], help="fit cpuwork/memwork to a target time")
    c.add_argument("--target-seconds", "--time", dest="target_seconds", type=float, help="target seconds per task")
    c.add_argument("--report", "-o", "--output", dest="output", help="report file (default: stdout)")
    c.add_argument("--f", type=_fraction, default=0.5)
    c.add_argument("--tolerance", type=float, default=0.05)
    c.add_argument("--max-iterations", type=_positive_int, default=20)
    c.add_argument("--cores", type=_positive_int, default=1)
    c.add_argument("--array-bytes", type=_bytes, default=64 * 2**20)
    c.add_argument("--node-cores", type=_positive_int, help="also time under load on half of this many cores")
    c.add_argument("--sweep", action="store_true", help="fit every f from 0.1 to 0.9 instead of --f")
    c.add_argument("--reference-loaded", type=float, help="real task's seconds under the same load")
    c.add_argument("--profile", help="instruction counts file; prints the matching f and exits")
    c.set_defaults(func=cmd_calibrate)

    sub.add_parser(
        "run-task", parents=[taskbench_parser("wfforge run-task", add_help=False)], help="run one benchmark task"
    ).set_defaults(func=cmd_run_task)

    t = sub.add_parser("translate", parents=[seeded], help="emit a DAG manifest or make file")
    t.add_argument("--spec", required=True)
    t.add_argument("--format", choices=FORMATS, default="portable-dag")
    t.add_argument("-o", "--output", default=".", help="output directory")
    t.add_argument("--program", help="taskbench command to embed (default: taskbench)")
    t.add_argument("--array-bytes", type=_bytes)
    t.add_argument("--allow-empty", action="store_true", help="permit zero-byte files")
    t.set_defaults(func=cmd_translate)

    r = sub.add_parser("run", parents=[seeded], help="execute a spec on this machine")
    r.add_argument("--spec", required=True)
    r.add_argument("--cores", type=_positive_int, required=True, help="core budget")
    r.add_argument("--workdir")
    r.add_argument("--trace", help="trace JSON path (default: stdout)")
    r.add_argument("--array-bytes", type=_bytes)
    r.add_argument("--allow-empty", action="store_true")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("estimate", parents=[out], help="analytical makespan estimates")
    e.add_argument("--spec", required=True)
    e.add_argument("--model", choices=(*MODELS, "all"), default="all")
    e.add_argument("--nodes", type=_positive_int, help="default: one node per 400 tasks")
    e.add_argument("--cores-per-node", type=_positive_int, default=40)
    e.add_argument("--bw-read", type=_rate, required=True, help="bytes/sec per node (SI suffixes)")
    e.add_argument("--bw-write", type=_rate, required=True)
    e.add_argument("--wt", type=float, default=0.0, help="compute seconds per task")
    e.add_argument("--costs", help="JSON object task id -> compute seconds")
    e.add_argument("--overhead", type=float, default=0.0, help="seconds added to every estimate")
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("analyze", parents=[out], help="metrics from trace files")
    a.add_argument("--trace", required=True)
    a.add_argument("--against")
    a.add_argument("--metric", choices=("throughput", "ecdf", "ks", "ratio"), required=True)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    from .analyze import AnalysisError
    from .calibrate import CalibrationError
    from .recipes import RecipeError
    from .runner import RunnerError

    domain = (wfspec.SpecError, RecipeError, RunnerError, CalibrationError, AnalysisError, ValueError, OSError)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(f"{args.command}: {exc}")
    except domain as exc:
        print(f"wfforge {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
