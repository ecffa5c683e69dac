"""Task-level benchmark kernel.

A task reads its input files in one thread, runs ``cores`` groups of 10
workers mixing a CPU kernel and a memory kernel, then writes its output
files in one thread.
"""

from .core import (
    WORKERS_PER_CORE,
    ComputeResult,
    KernelReport,
    MemResult,
    PhaseError,
    WorkerRecord,
    compute_phase,
    cpu_kernel,
    mem_kernel,
    read_phase,
    run_task,
    split_evenly,
    usable_cores,
    write_phase,
)
from .kernels import DEFAULT_ARRAY_BYTES, TERMS_PER_UNIT

__all__ = [
    "WORKERS_PER_CORE",
    "DEFAULT_ARRAY_BYTES",
    "TERMS_PER_UNIT",
    "ComputeResult",
    "KernelReport",
    "MemResult",
    "PhaseError",
    "WorkerRecord",
    "compute_phase",
    "cpu_kernel",
    "mem_kernel",
    "read_phase",
    "run_task",
    "split_evenly",
    "usable_cores",
    "write_phase",
]
