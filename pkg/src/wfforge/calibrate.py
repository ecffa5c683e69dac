"""Fitting kernel parameters so a benchmark task runs as long as a real one.

``fit_work`` rescales cpuwork and memwork by ``T / measured`` until both the
CPU workers and the memory workers finish within a relative tolerance of the
target time.  ``f`` is chosen either from instruction counts
(:func:`f_from_profile`) or empirically from runtime ratios under background
memory load (:func:`calibrate_under_load` + :func:`select_f_empirical`).
"""

from __future__ import annotations

import json
import logging
import math
import os
import statistics
import threading
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .taskbench import kernels
from .taskbench.core import alloc_array, compute_phase, usable_cores
from .taskbench.kernels import DEFAULT_ARRAY_BYTES
from .wfspec import TaskParams, is_tenth

log = logging.getLogger(__name__)

# (cpuwork, memwork, f) -> (T_cpu, T_mem); None where no worker of that kind ran
Runner = Callable[[float, float, float], "tuple[float | None, float | None]"]

SWEEP = tuple(i / 10 for i in range(1, 10))


class CalibrationError(RuntimeError):
    def __init__(self, message: str, last: "FitResult | None" = None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class CalibrationTarget:
    T: float
    f: float
    tolerance: float = 0.05
    max_iterations: int = 20

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"target time must be positive, got {self.T}")
        if not 0 < self.tolerance < 1:
            raise ValueError(f"tolerance must be in (0, 1), got {self.tolerance}")
        if not is_tenth(self.f):
            raise ValueError(f"f must be a multiple of 0.1 in [0, 1], got {self.f}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class ProfileCounts:
    total_instructions: int
    memory_instructions: int

    def __post_init__(self):
        if not 0 <= self.memory_instructions <= self.total_instructions:
            raise ValueError("need 0 <= memory_instructions <= total_instructions")

    @classmethod
    def from_text(cls, text: str) -> "ProfileCounts":
        """Accept ``{"total_instructions": T, "memory_instructions": M}`` or two integers."""
        text = text.strip()
        if text.startswith("{"):
            d = json.loads(text)
            return cls(int(d["total_instructions"]), int(d["memory_instructions"]))
        parts = text.split()
        if len(parts) != 2:
            raise ValueError("expected two integers: total_instructions memory_instructions")
        return cls(int(parts[0]), int(parts[1]))


@dataclass
class FitResult:
    cpuwork: float
    memwork: float
    iterations: int
    # one row per round: (cpuwork, memwork, T_cpu, T_mem)
    history: list[tuple[float, float, float | None, float | None]] = field(default_factory=list)


def _median(values: Sequence[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return statistics.median(vals) if vals else None


def measure(runner: Runner, cpuwork: float, memwork: float, f: float, repeats: int = 3):
    """Median T_cpu and median T_mem over ``repeats`` runs."""
    runs = [runner(cpuwork, memwork, f) for _ in range(repeats)]
    return _median([r[0] for r in runs]), _median([r[1] for r in runs])


def _rel_err(t: float | None, T: float) -> float:
    return 0.0 if t is None else abs(t - T) / T


def fit_work(
    target: CalibrationTarget,
    runner: Runner,
    cpuwork: float = 100.0,
    memwork: float = 100.0,
    repeats: int = 3,
) -> FitResult:
    """Iterate ``work *= T / measured`` until both times are within tolerance.

    A kind of worker that does not exist for ``target.f`` (no CPU workers at
    f=0, no memory workers at f=1) is exempt from its inequality.
    """
    if cpuwork <= 0 or memwork <= 0:
        raise ValueError("initial guesses must be positive")
    T = target.T
    result = FitResult(cpuwork, memwork, 0)
    for it in range(1, target.max_iterations + 1):
        t_cpu, t_mem = measure(runner, cpuwork, memwork, target.f, repeats)
        result.history.append((cpuwork, memwork, t_cpu, t_mem))
        result.cpuwork, result.memwork, result.iterations = cpuwork, memwork, it
        if t_cpu is None and t_mem is None:
            raise CalibrationError("runner reported neither CPU nor memory time", result)
        if _rel_err(t_cpu, T) < target.tolerance and _rel_err(t_mem, T) < target.tolerance:
            log.debug("converged after %d rounds: cpuwork=%g memwork=%g", it, cpuwork, memwork)
            return result
        if t_cpu == 0 or t_mem == 0:
            raise CalibrationError("runner reported a zero duration; cannot rescale", result)
        if t_cpu is not None:
            cpuwork = cpuwork * T / t_cpu
        if t_mem is not None:
            memwork = memwork * T / t_mem
    raise CalibrationError(
        f"no convergence within {target.max_iterations} rounds "
        f"(last cpuwork={result.cpuwork:g}, memwork={result.memwork:g})",
        result,
    )


def f_from_profile(p: ProfileCounts) -> float:
    """Non-memory share of instructions, rounded to the nearest tenth (ties up)."""
    if p.total_instructions == 0:
        raise ValueError("total_instructions is zero")
    raw = Fraction(p.total_instructions - p.memory_instructions, p.total_instructions)
    tenths = math.floor(raw * 10 + Fraction(1, 2))
    return min(max(tenths, 0), 10) / 10


def select_f_empirical(ratios: Mapping[float, float]) -> float:
    """The f whose runtime ratio is closest to 1.0; ties go to the smaller f."""
    if not ratios:
        raise ValueError("no ratios given")
    best = min(abs(r - 1.0) for r in ratios.values())
    close = [f for f, r in ratios.items() if math.isclose(abs(r - 1.0), best, rel_tol=1e-9, abs_tol=1e-12)]
    return min(close)


# --- real-kernel runner and background load ---------------------------------

def kernel_runner(cores: int = 1, array_bytes: int = DEFAULT_ARRAY_BYTES, seed: int = 0) -> Runner:
    """A runner that executes the compute phase in-process."""

    def run(cpuwork: float, memwork: float, f: float):
        res = compute_phase(TaskParams(cores, cpuwork, memwork, f), seed=seed, array_bytes=array_bytes)
        return res.t_cpu, res.t_mem

    return run


class BackgroundLoad:
    """Memory-kernel workers hammering private arrays until stopped.

    Used as a context manager; each worker is pinned to one of ``cores``.
    """

    CHUNK = 100_000

    def __init__(self, cores: Sequence[int], array_bytes: int = DEFAULT_ARRAY_BYTES, seed: int = 1):
        self.cores = list(cores)
        self.array_bytes = array_bytes
        self.seed = seed
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._errors: list[BaseException] = []
        self.increments = 0
        self._lock = threading.Lock()

    def _loop(self, core: int, idx: int) -> None:
        try:
            try:
                os.sched_setaffinity(0, {core})
            except (AttributeError, OSError):
                pass
            arr = alloc_array(self.array_bytes)
            state = np.uint64(kernels.worker_seed(self.seed, idx))
            done = 0
            while not self._stop.is_set():
                state = np.uint64(kernels.random_increments(arr, self.CHUNK, state))
                done += self.CHUNK
            with self._lock:
                self.increments += done
        except BaseException as exc:
            self._errors.append(exc)

    def __enter__(self) -> "BackgroundLoad":
        kernels.warm_up()
        for i, core in enumerate(self.cores):
            t = threading.Thread(target=self._loop, args=(core, i), daemon=True, name=f"load-{i}")
            t.start()
            self._threads.append(t)
        return self

    def __exit__(self, *exc_info) -> None:
        self._stop.set()
        for t in self._threads:
            t.join()
        if self._errors and exc_info[0] is None:
            raise CalibrationError(f"load generator failed: {self._errors[0]!r}")


@dataclass(frozen=True)
class LoadSpec:
    node_cores: int  # cores on the node; load runs on floor(node_cores / 2) of them
    bench_cores: int = 1
    array_bytes: int = DEFAULT_ARRAY_BYTES
    reference_loaded_seconds: float | None = None  # the real task's time under the same load

    @property
    def load_cores(self) -> int:
        return self.node_cores // 2


@dataclass
class CalibrationEntry:
    f: float
    cpuwork: float
    memwork: float
    iterations: int
    t_noload: float
    t_load: float
    ratio: float


@dataclass
class CalibrationReport:
    T: float
    tolerance: float
    load_cores: int
    entries: list[CalibrationEntry]
    selected_f: float | None
    warnings: list[str] = field(default_factory=list)

    def ratios(self) -> dict[float, float]:
        return {e.f: e.ratio for e in self.entries}

    def to_dict(self) -> dict:
        return asdict(self)


def _span(t_cpu: float | None, t_mem: float | None) -> float:
    return max(t for t in (t_cpu, t_mem) if t is not None)


def _load_core_ids(spec: LoadSpec, warnings: list[str]) -> list[int]:
    cores = usable_cores()
    free = cores[spec.bench_cores :]
    want = spec.load_cores
    if len(free) < want:
        warnings.append(f"only {len(free)} cores free for {want} load workers; load shares cores")
        pool = free or cores
        return [pool[i % len(pool)] for i in range(want)]
    return free[:want]


def calibrate_under_load(
    target: CalibrationTarget,
    load_spec: LoadSpec,
    fs: Sequence[float] | None = None,
    runner: Runner | None = None,
    repeats: int = 3,
) -> CalibrationReport:
    """Fit work for each f, then time the fitted benchmark with and without load.

    ``ratio`` is the loaded time over ``load_spec.reference_loaded_seconds``
    when the real task's loaded time is known, otherwise over the unloaded time.
    """
    fs = list(fs) if fs is not None else [target.f]
    runner = runner or kernel_runner(load_spec.bench_cores, load_spec.array_bytes)
    warnings: list[str] = []
    load_cores = _load_core_ids(load_spec, warnings)
    entries = []
    for f in fs:
        t = CalibrationTarget(target.T, f, target.tolerance, target.max_iterations)
        fit = fit_work(t, runner, repeats=repeats)
        t_noload = _span(*measure(runner, fit.cpuwork, fit.memwork, f, repeats))
        with BackgroundLoad(load_cores, load_spec.array_bytes):
            t_load = _span(*measure(runner, fit.cpuwork, fit.memwork, f, repeats))
        ref = load_spec.reference_loaded_seconds or t_noload
        entries.append(CalibrationEntry(f, fit.cpuwork, fit.memwork, fit.iterations, t_noload, t_load, t_load / ref))
    selected = select_f_empirical({e.f: e.ratio for e in entries}) if load_spec.reference_loaded_seconds else None
    return CalibrationReport(target.T, target.tolerance, load_spec.load_cores, entries, selected, warnings)
