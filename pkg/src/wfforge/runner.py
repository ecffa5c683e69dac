"""Turning a spec into runnable artifacts and running it on this machine.

Two text formats are emitted by :func:`translate`:

* a portable DAG manifest (``WFDAG 1`` header, ``TASK`` lines carrying full
  taskbench command lines, ``EDGE`` lines), and
* a GNU make file (grouped targets, needs make >= 4.3).

:func:`execute_local` runs every task as its own taskbench process under a
core budget and records an :class:`ExecutionTrace`.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import logging
import os
import platform
import queue
import re
import shlex
import subprocess
import sys
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import wfspec
from .taskbench.core import usable_cores, write_phase
from .wfspec import InvalidSpecError, WorkflowSpec

log = logging.getLogger(__name__)

REPORT_DIR = "_reports"
LOCK_NAME = ".wfforge.lock"
FORMATS = ("portable-dag", "make-style")
DEFAULT_PROGRAM = ("taskbench",)
_SAFE_ID = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.+-]*\Z")


class RunnerError(RuntimeError):
    pass


def task_seed(run_seed: int, task_id: str) -> int:
    digest = hashlib.sha256(f"{run_seed}:{task_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _check_translatable(spec: WorkflowSpec, allow_empty: bool) -> None:
    report = wfspec.validate(spec)
    if not report.ok:
        raise InvalidSpecError(report.violations)
    bad = [x for x in [t.id for t in spec.tasks] + [f.id for f in spec.files] if not _SAFE_ID.match(x) or x == REPORT_DIR]
    if bad:
        raise RunnerError(f"ids unusable as file names: {', '.join(bad[:5])}")
    if not allow_empty:
        empty = [f.id for f in spec.files if f.size_bytes == 0]
        if empty:
            raise RunnerError(
                f"{len(empty)} file(s) have no size assigned (e.g. {empty[0]}); "
                "distribute a footprint first or pass allow_empty"
            )


def task_command(
    spec: WorkflowSpec,
    task_id: str,
    seed: int = 0,
    program: Sequence[str] = DEFAULT_PROGRAM,
    array_bytes: int | None = None,
    oversubscribe: bool = False,
) -> list[str]:
    """Full taskbench argv for one task; paths are relative to the run directory."""
    t = spec.task_map()[task_id]
    sizes = {f.id: f.size_bytes for f in spec.files}
    p = t.params
    argv = [
        *program,
        "--name", t.id,
        "--cores", str(p.cores),
        "--cpuwork", _fmt(p.cpuwork),
        "--memwork", _fmt(p.memwork),
        "--f", _fmt(round(p.f, 1)),
        "--seed", str(task_seed(seed, t.id)),
        "--report", f"{REPORT_DIR}/{t.id}.json",
    ]
    if t.inputs:
        argv += ["--input", *t.inputs]
    if t.outputs:
        argv += ["--output", *(f"{fid}:{sizes[fid]}" for fid in t.outputs)]
    if array_bytes is not None:
        argv += ["--array-bytes", str(array_bytes)]
    if oversubscribe:
        argv.append("--oversubscribe")
    return argv


def to_manifest(spec: WorkflowSpec, seed: int = 0, program: Sequence[str] = DEFAULT_PROGRAM,
                array_bytes: int | None = None) -> str:
    lines = ["WFDAG 1"]
    for t in spec.tasks:
        lines.append(f"TASK {t.id} {shlex.join(task_command(spec, t.id, seed, program, array_bytes))}")
    for p, c in sorted(spec.edges()):
        lines.append(f"EDGE {p} {c}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> tuple[dict[str, list[str]], set[tuple[str, str]]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "WFDAG 1":
        raise RunnerError("not a WFDAG 1 manifest")
    tasks: dict[str, list[str]] = {}
    edges: set[tuple[str, str]] = set()
    for n, line in enumerate(lines[1:], start=2):
        kind, _, rest = line.partition(" ")
        if kind == "TASK":
            tid, _, cmd = rest.partition(" ")
            tasks[tid] = shlex.split(cmd)
        elif kind == "EDGE":
            parts = rest.split()
            if len(parts) != 2:
                raise RunnerError(f"line {n}: EDGE needs two task ids")
            edges.add((parts[0], parts[1]))
        elif line.strip():
            raise RunnerError(f"line {n}: unknown record {kind!r}")
    return tasks, edges


def to_makefile(spec: WorkflowSpec, seed: int = 0, program: Sequence[str] = DEFAULT_PROGRAM,
                array_bytes: int | None = None) -> str:
    sizes = {f.id: f.size_bytes for f in spec.files}
    outputs = [fid for t in spec.tasks for fid in t.outputs]
    out = [
        f"# workflow {spec.name}: {len(spec.tasks)} tasks",
        f"TASKBENCH ?= {shlex.join(program)}",
        "",
        ".PHONY: all",
        f"all: {' '.join(outputs)}",
        "",
        f"{REPORT_DIR}:",
        f"\tmkdir -p {REPORT_DIR}",
        "",
    ]
    for fid in spec.workflow_inputs():
        out += [
            f"{fid}: | {REPORT_DIR}",
            f"\t$(TASKBENCH) --name stage.{fid} --cpuwork 0 --memwork 0 --f 1 --seed {task_seed(seed, fid)} "
            f"--report {REPORT_DIR}/stage.{fid}.json --output {fid}:{sizes[fid]}",
            "",
        ]
    for t in spec.tasks:
        cmd = task_command(spec, t.id, seed, ("$(TASKBENCH)",), array_bytes)
        target = " ".join(t.outputs) if t.outputs else f".done.{t.id}"
        grouped = " &:" if len(t.outputs) > 1 else ":"
        recipe = " ".join(cmd)
        if not t.outputs:
            recipe += f" && touch {target}"
        out += [f"{target}{grouped} {' '.join(t.inputs)} | {REPORT_DIR}".replace("  ", " "), f"\t{recipe}", ""]
    return "\n".join(out)


def translate(spec: WorkflowSpec, fmt: str = "portable-dag", seed: int = 0,
              program: Sequence[str] = DEFAULT_PROGRAM, array_bytes: int | None = None,
              allow_empty: bool = False) -> dict[str, str]:
    """File name -> text for the requested format."""
    _check_translatable(spec, allow_empty)
    if fmt == "portable-dag":
        return {f"{spec.name}.wfdag": to_manifest(spec, seed, program, array_bytes)}
    if fmt == "make-style":
        return {"Makefile": to_makefile(spec, seed, program, array_bytes)}
    raise RunnerError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


# --- trace -------------------------------------------------------------------

@dataclass
class TaskRecord:
    id: str
    start: float  # seconds since run origin
    end: float
    status: str  # "ok" | "failed" | "skipped"
    exit_code: int | None
    cores: int
    report: dict | None = None


@dataclass
class TraceMeta:
    core_cap: int
    seed: int
    spec: str
    host: dict = field(default_factory=dict)
    origin_epoch: float = 0.0


@dataclass
class ExecutionTrace:
    meta: TraceMeta
    tasks: list[TaskRecord]

    @property
    def ok(self) -> bool:
        return all(t.status == "ok" for t in self.tasks)

    def ran(self) -> list[TaskRecord]:
        return [t for t in self.tasks if t.status != "skipped"]

    def to_dict(self) -> dict:
        return {"meta": asdict(self.meta), "tasks": [asdict(t) for t in self.tasks]}

    @classmethod
    def from_dict(cls, d: dict) -> "ExecutionTrace":
        return cls(TraceMeta(**d["meta"]), [TaskRecord(**t) for t in d["tasks"]])

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ExecutionTrace":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def dependency_violations(trace: ExecutionTrace, spec: WorkflowSpec) -> list[str]:
    rec = {t.id: t for t in trace.tasks}
    out = []
    for p, c in sorted(spec.edges()):
        a, b = rec.get(p), rec.get(c)
        if a is None or b is None or b.status == "skipped":
            continue
        if a.status != "ok" or b.start < a.end:
            out.append(f"{c} started at {b.start:.6f} before {p} ended at {a.end:.6f}")
    return out


def peak_cores(trace: ExecutionTrace) -> int:
    """Largest sum of cores of simultaneously running tasks (ends before starts on ties)."""
    events = []
    for t in trace.ran():
        events.append((t.start, 1, t.cores))
        events.append((t.end, 0, -t.cores))
    busy = peak = 0
    for _, _, delta in sorted(events):
        busy += delta
        peak = max(peak, busy)
    return peak


# --- local execution ---------------------------------------------------------

def host_description() -> dict:
    return {
        "node": platform.node(),
        "machine": platform.machine(),
        "system": platform.system(),
        "python": platform.python_version(),
        "usable_cores": len(usable_cores()),
    }


def _ready_order(spec: WorkflowSpec):
    tasks = spec.task_map()

    def key(tid: str):
        p = tasks[tid].params
        return (-(p.cpuwork + p.memwork), tid)

    return key


def execute_local(
    spec: WorkflowSpec,
    core_cap: int,
    workdir,
    seed: int = 0,
    array_bytes: int | None = None,
    allow_empty: bool = False,
    program: Sequence[str] | None = None,
) -> ExecutionTrace:
    """Run ``spec`` with at most ``core_cap`` cores busy at once.

    Ready tasks start largest work first (cpuwork + memwork, ties by id);
    a task that does not fit leaves room for smaller ones behind it.  A
    failed task's descendants are skipped; independent branches go on.
    """
    _check_translatable(spec, allow_empty)
    too_big = [t.id for t in spec.tasks if t.params.cores > core_cap]
    if too_big:
        raise RunnerError(f"core_cap={core_cap} is below the cores needed by: {', '.join(too_big[:5])}")
    program = tuple(program) if program else (sys.executable, "-m", "wfforge.taskbench")
    n_usable = len(usable_cores())
    workdir = Path(workdir)
    (workdir / REPORT_DIR).mkdir(parents=True, exist_ok=True)

    with open(workdir / LOCK_NAME, "w") as lock:
        try:
            fcntl.flock(lock, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise RunnerError(f"another run is using {workdir}") from None
        sizes = {f.id: f.size_bytes for f in spec.files}
        for fid in spec.workflow_inputs():
            write_phase(workdir / fid, sizes[fid], seed=task_seed(seed, fid))
        return _schedule(spec, core_cap, workdir, seed, array_bytes, program, n_usable)


def _schedule(spec, core_cap, workdir, seed, array_bytes, program, n_usable) -> ExecutionTrace:
    tasks = spec.task_map()
    parents = spec.parents()
    children: dict[str, set[str]] = {t: set() for t in tasks}
    for c, ps in parents.items():
        for p in ps:
            children[p].add(c)
    waiting = {t: len(ps) for t, ps in parents.items()}
    ready = sorted((t for t, n in waiting.items() if n == 0), key=_ready_order(spec))
    key = _ready_order(spec)
    records: dict[str, TaskRecord] = {}
    procs: dict[str, subprocess.Popen] = {}
    done_q: queue.Queue = queue.Queue()
    free = core_cap

    origin_epoch = time.time()
    origin = time.perf_counter()

    def wait_for(tid: str, proc: subprocess.Popen) -> None:
        rc = proc.wait()
        done_q.put((tid, rc, time.perf_counter() - origin))

    def skip_descendants(tid: str) -> None:
        stack = list(children[tid])
        while stack:
            c = stack.pop()
            if c in records:
                continue
            records[c] = TaskRecord(c, 0.0, 0.0, "skipped", None, tasks[c].params.cores)
            stack.extend(children[c])

    try:
        while ready or procs:
            still = []
            for tid in ready:
                if tid in records:  # skipped after becoming ready
                    continue
                need = tasks[tid].params.cores
                if need > free:
                    still.append(tid)
                    continue
                argv = task_command(spec, tid, seed, program, array_bytes, oversubscribe=need > n_usable)
                start = time.perf_counter() - origin
                with open(workdir / REPORT_DIR / f"{tid}.stderr", "wb") as err:
                    proc = subprocess.Popen(argv, cwd=workdir, stdout=subprocess.DEVNULL, stderr=err)
                procs[tid] = proc
                records[tid] = TaskRecord(tid, start, start, "running", None, need)
                free -= need
                threading.Thread(target=wait_for, args=(tid, proc), daemon=True).start()
            ready = still
            if not procs:
                break
            tid, rc, end = done_q.get()
            proc = procs.pop(tid)
            free += tasks[tid].params.cores
            rec = records[tid]
            rec.end, rec.exit_code = end, rc
            rec.report = _load_report(workdir / REPORT_DIR / f"{tid}.json")
            if rc == 0:
                rec.status = "ok"
                for c in children[tid]:
                    waiting[c] -= 1
                    if waiting[c] == 0 and c not in records:
                        ready.append(c)
                ready.sort(key=key)
            else:
                rec.status = "failed"
                err = (workdir / REPORT_DIR / f"{tid}.stderr").read_text(errors="replace").strip()
                log.error("task %s exited with %s: %s", tid, rc, err[-2000:])
                skip_descendants(tid)
    finally:
        for proc in procs.values():
            proc.kill()
            proc.wait()

    ordered = [records[t.id] for t in spec.tasks if t.id in records]
    meta = TraceMeta(core_cap, seed, spec.name, host_description(), origin_epoch)
    return ExecutionTrace(meta, ordered)


def _load_report(path: Path) -> dict | None:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None


# --- verification ------------------------------------------------------------

@dataclass
class Mismatch:
    file_id: str
    expected: int
    actual: int | None  # None: missing


@dataclass
class OutputReport:
    checked: int
    mismatches: list[Mismatch]
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def verify_outputs(spec: WorkflowSpec, workdir) -> OutputReport:
    workdir = Path(workdir)
    declared = {f.id: f.size_bytes for f in spec.files}
    outputs = [fid for t in spec.tasks for fid in t.outputs]
    mismatches = []
    for fid in outputs:
        path = workdir / fid
        actual = path.stat().st_size if path.is_file() else None
        if actual != declared[fid]:
            mismatches.append(Mismatch(fid, declared[fid], actual))
    warnings = []
    if workdir.is_dir():
        for entry in sorted(os.listdir(workdir)):
            if entry not in declared and entry not in (REPORT_DIR, LOCK_NAME):
                warnings.append(f"undeclared file in workdir: {entry}")
    return OutputReport(len(outputs), mismatches, warnings)
