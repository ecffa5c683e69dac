"""The three-phase task benchmark: read inputs, compute, write outputs."""

from __future__ import annotations

import logging
import math
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..wfspec import TaskParams
from . import kernels
from .kernels import DEFAULT_ARRAY_BYTES, ELEMENT_BYTES, TERMS_PER_UNIT

log = logging.getLogger(__name__)

WORKERS_PER_CORE = 10
READ_CHUNK = 8 * 1024 * 1024
WRITE_CHUNK = 4 * 1024 * 1024


class PhaseError(RuntimeError):
    """A benchmark phase failed.  ``report`` holds whatever was measured so far."""

    def __init__(self, phase: str, message: str, path: str | None = None):
        self.phase = phase
        self.path = path
        self.report: KernelReport | None = None
        where = f" ({path})" if path else ""
        super().__init__(f"{phase} phase failed{where}: {message}")


@dataclass
class WorkerRecord:
    kind: str  # "cpu" or "mem"
    group: int
    core: int
    seconds: float
    iterations: int  # series terms for cpu, increments for mem
    checksum: int | None = None  # sum of the private array for mem workers

    @property
    def units(self) -> float:
        return self.iterations / TERMS_PER_UNIT if self.kind == "cpu" else float(self.iterations)


@dataclass
class KernelReport:
    name: str = ""
    seed: int = 0
    cores: int = 1
    cpuwork: float = 0.0
    memwork: float = 0.0
    f: float = 1.0
    array_bytes: int = DEFAULT_ARRAY_BYTES
    bytes_read: int = 0
    bytes_written: int = 0
    t_read: float = 0.0
    t_cpu: float | None = None
    t_mem: float | None = None
    t_write: float = 0.0
    # phase name -> (start, end), seconds since the task started
    phases: dict[str, tuple[float, float]] = field(default_factory=dict)
    workers: list[WorkerRecord] = field(default_factory=list)
    pi_estimate: float | None = None
    pinned: bool = False
    warnings: list[str] = field(default_factory=list)
    status: str = "ok"
    failed_phase: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phases"] = {k: list(v) for k, v in self.phases.items()}
        for w, rec in zip(d["workers"], self.workers):
            w["units"] = rec.units
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelReport":
        d = dict(d)
        workers = [
            WorkerRecord(**{k: v for k, v in w.items() if k != "units"}) for w in d.pop("workers", [])
        ]
        phases = {k: tuple(v) for k, v in d.pop("phases", {}).items()}
        return cls(**d, workers=workers, phases=phases)


# --- phase 1 -----------------------------------------------------------------

def read_phase(path) -> int:
    """Read a whole file sequentially in the calling thread; return its length."""
    total = 0
    try:
        with open(path, "rb") as fh:
            while chunk := fh.read(READ_CHUNK):
                total += len(chunk)
    except OSError as exc:
        raise PhaseError("read", exc.strerror or str(exc), str(path)) from exc
    return total


# --- phase 2 -----------------------------------------------------------------

def cpu_terms(cpuwork: float) -> int:
    return int(round(cpuwork * TERMS_PER_UNIT))


def cpu_kernel(cpuwork: float, start_term: int = 0) -> tuple[float, float]:
    """Run ``cpuwork`` units of the series starting at term ``start_term``.

    Returns ``(estimate, seconds)`` where estimate is 4x the partial sum; with
    ``start_term=0`` that is the running estimate of pi.
    """
    terms = cpu_terms(cpuwork)
    kernels.warm_up()
    t0 = time.perf_counter()
    partial = kernels.leibniz_partial(start_term, terms) if terms else 0.0
    return 4.0 * partial, time.perf_counter() - t0


@dataclass
class MemResult:
    seconds: float
    increments: int
    checksum: int
    array: np.ndarray | None = None


def alloc_array(array_bytes: int) -> np.ndarray:
    if array_bytes < ELEMENT_BYTES:
        raise PhaseError("compute", f"array of {array_bytes} bytes holds no element")
    try:
        return np.zeros(array_bytes // ELEMENT_BYTES, dtype=np.int64)
    except (MemoryError, ValueError) as exc:
        raise PhaseError("compute", f"cannot allocate {array_bytes} bytes: {exc}") from exc


def mem_kernel(
    memwork: float,
    array_bytes: int = DEFAULT_ARRAY_BYTES,
    seed: int = 0,
    keep_array: bool = False,
) -> MemResult:
    """Perform ``memwork`` increments at random positions of a private array."""
    count = int(round(memwork))
    arr = alloc_array(array_bytes)
    kernels.warm_up()
    t0 = time.perf_counter()
    if count:
        kernels.random_increments(arr, count, np.uint64(seed & kernels._MASK64))
    seconds = time.perf_counter() - t0
    return MemResult(seconds, count, int(arr.sum()), arr if keep_array else None)


def split_evenly(total: int, parts: int) -> list[int]:
    """Split an integer total; the remainder goes to the lowest-indexed parts."""
    if parts == 0:
        return []
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def usable_cores() -> list[int]:
    if hasattr(os, "sched_getaffinity"):
        return sorted(os.sched_getaffinity(0))
    return list(range(os.cpu_count() or 1))


@dataclass
class ComputeResult:
    workers: list[WorkerRecord]
    t_cpu: float | None
    t_mem: float | None
    pi_estimate: float | None
    pinned: bool
    warnings: list[str]
    started: float  # perf_counter
    ended: float


def compute_phase(
    params: TaskParams,
    seed: int = 0,
    array_bytes: int = DEFAULT_ARRAY_BYTES,
    oversubscribe: bool = False,
) -> ComputeResult:
    """Run ``params.cores`` groups of 10 workers, each group pinned to one core."""
    problems = params.problems()
    if problems:
        raise PhaseError("compute", "; ".join(problems))
    n = params.cores
    n_cpu = params.cpu_workers_per_core
    warnings: list[str] = []

    cores = usable_cores()
    if n > len(cores):
        if not oversubscribe:
            raise PhaseError("compute", f"{n} cores requested but only {len(cores)} usable")
        warnings.append(f"oversubscribed: {n} groups share {len(cores)} usable cores")
    can_pin = hasattr(os, "sched_setaffinity")
    if not can_pin:
        warnings.append("thread affinity unsupported on this platform; running unpinned")

    layout = [(g, slot < n_cpu) for g in range(n) for slot in range(WORKERS_PER_CORE)]
    n_cpu_total = sum(1 for _, is_cpu in layout if is_cpu)
    cpu_share = split_evenly(cpu_terms(params.cpuwork), n_cpu_total)
    mem_share = split_evenly(int(round(params.memwork)), len(layout) - n_cpu_total)

    kernels.warm_up()
    # allocate up front so allocation failures surface before any thread starts
    arrays = [alloc_array(array_bytes) for _ in mem_share]

    jobs = []
    ci = mi = 0
    term_offset = 0
    for idx, (g, is_cpu) in enumerate(layout):
        core = cores[g % len(cores)]
        if is_cpu:
            jobs.append(("cpu", g, core, cpu_share[ci], term_offset, None))
            term_offset += cpu_share[ci]
            ci += 1
        else:
            state = kernels.worker_seed(seed, idx)
            jobs.append(("mem", g, core, mem_share[mi], state, arrays[mi]))
            mi += 1

    results: list[WorkerRecord | None] = [None] * len(jobs)
    partials = [0.0] * len(jobs)
    pinned = [False] * len(jobs)
    failures: list[BaseException] = []
    barrier = threading.Barrier(len(jobs))

    def work(i: int) -> None:
        kind, g, core, count, arg, arr = jobs[i]
        try:
            if can_pin:
                try:
                    os.sched_setaffinity(0, {core})
                    pinned[i] = True
                except OSError:
                    pass
            barrier.wait()
            t0 = time.perf_counter()
            if kind == "cpu":
                partials[i] = kernels.leibniz_partial(arg, count) if count else 0.0
                checksum = None
            elif count:
                kernels.random_increments(arr, count, np.uint64(arg))
            seconds = time.perf_counter() - t0
            if kind == "mem":
                checksum = int(arr.sum())
            results[i] = WorkerRecord(kind, g, core, seconds, count, checksum)
        except BaseException as exc:  # surfaced after join
            barrier.abort()
            failures.append(exc)

    threads = [threading.Thread(target=work, args=(i,), name=f"tb-{i}") for i in range(len(jobs))]
    started = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ended = time.perf_counter()
    if failures:
        raise PhaseError("compute", f"worker failed: {failures[0]!r}")

    if can_pin and not all(pinned):
        warnings.append("could not pin every worker; some ran unpinned")
    workers = [r for r in results if r is not None]
    cpu_t = [w.seconds for w in workers if w.kind == "cpu"]
    mem_t = [w.seconds for w in workers if w.kind == "mem"]
    return ComputeResult(
        workers=workers,
        t_cpu=max(cpu_t) if cpu_t else None,
        t_mem=max(mem_t) if mem_t else None,
        pi_estimate=4.0 * math.fsum(partials) if n_cpu_total else None,
        pinned=can_pin and all(pinned),
        warnings=warnings,
        started=started,
        ended=ended,
    )


# --- phase 3 -----------------------------------------------------------------

def write_phase(path, out_bytes: int, seed: int = 0) -> int:
    """Write exactly ``out_bytes`` seeded pseudo-random bytes to ``path``."""
    if out_bytes < 0:
        raise PhaseError("write", f"negative size {out_bytes}", str(path))
    rng = np.random.Generator(np.random.PCG64(seed & kernels._MASK64))
    written = 0
    try:
        with open(path, "wb") as fh:
            while written < out_bytes:
                chunk = rng.bytes(min(WRITE_CHUNK, out_bytes - written))
                fh.write(chunk)
                written += len(chunk)
    except OSError as exc:
        raise PhaseError("write", exc.strerror or str(exc), str(path)) from exc
    return written


# --- full task ---------------------------------------------------------------

def run_task(
    params: TaskParams,
    inputs: Iterable = (),
    outputs: Sequence[tuple[object, int]] = (),
    seed: int = 0,
    name: str = "",
    array_bytes: int = DEFAULT_ARRAY_BYTES,
    oversubscribe: bool = False,
) -> KernelReport:
    """Read every input, compute, then write every output, strictly in order."""
    report = KernelReport(
        name=name,
        seed=seed,
        cores=params.cores,
        cpuwork=params.cpuwork,
        memwork=params.memwork,
        f=params.f,
        array_bytes=array_bytes,
    )
    t0 = time.perf_counter()
    phase = "read"
    try:
        s = time.perf_counter()
        for path in inputs:
            report.bytes_read += read_phase(path)
        e = time.perf_counter()
        report.t_read = e - s
        report.phases["read"] = (s - t0, e - t0)

        phase = "compute"
        res = compute_phase(params, seed=seed, array_bytes=array_bytes, oversubscribe=oversubscribe)
        report.workers = res.workers
        report.t_cpu, report.t_mem = res.t_cpu, res.t_mem
        report.pi_estimate = res.pi_estimate
        report.pinned = res.pinned
        report.warnings.extend(res.warnings)
        report.phases["compute"] = (res.started - t0, res.ended - t0)

        phase = "write"
        s = time.perf_counter()
        for i, (path, size) in enumerate(outputs):
            report.bytes_written += write_phase(path, int(size), seed=kernels.worker_seed(seed, -1 - i))
        e = time.perf_counter()
        report.t_write = e - s
        report.phases["write"] = (s - t0, e - t0)
    except PhaseError as exc:
        report.status = "failed"
        report.failed_phase = exc.phase
        report.error = str(exc)
        exc.report = report
        raise
    except Exception as exc:
        report.status = "failed"
        report.failed_phase = phase
        report.error = repr(exc)
        err = PhaseError(phase, repr(exc))
        err.report = report
        raise err from exc
    for w in report.warnings:
        log.warning("%s: %s", name or "task", w)
    return report
