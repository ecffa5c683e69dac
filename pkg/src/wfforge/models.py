"""Analytical makespan estimates for a workflow on ``n`` nodes of ``p`` cores.

Three estimators are provided:

* :func:`macro_no_overlap` treats the workflow as one task that reads, then
  computes on all cores, then writes.
* :func:`macro_overlap` assumes I/O and computation overlap perfectly.
* :func:`per_level` runs the workflow level by level, each level as batches
  of at most ``n * p`` tasks in longest-first order, where co-located tasks
  share the node's bandwidth.

None of them models workflow-system overhead; measure it separately and
:func:`add_overhead`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .wfspec import WorkflowSpec


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class PlatformModel:
    n: int  # nodes
    p: int  # cores per node
    bw_read: float  # bytes/sec per node
    bw_write: float

    def __post_init__(self):
        if min(self.n, self.p) < 1 or min(self.bw_read, self.bw_write) <= 0:
            raise ModelError(f"platform parameters must be positive: {self}")


@dataclass(frozen=True)
class WorkloadAggregate:
    data_read: float  # bytes
    data_write: float  # bytes
    work: float  # core-seconds


@dataclass(frozen=True)
class TaskCost:
    task_id: str
    w_t: float  # seconds of sequential work
    read_bytes: float = 0.0
    write_bytes: float = 0.0


def macro_no_overlap(agg: WorkloadAggregate, plat: PlatformModel) -> float:
    n, p = plat.n, plat.p
    return (
        agg.data_read / (n * plat.bw_read)
        + agg.work / (n * p)
        + agg.data_write / (n * plat.bw_write)
    )


def macro_overlap(agg: WorkloadAggregate, plat: PlatformModel) -> float:
    n, p = plat.n, plat.p
    io = agg.data_read / (n * plat.bw_read) + agg.data_write / (n * plat.bw_write)
    return max(agg.work / (n * p), io)


def top_levels(spec: WorkflowSpec) -> dict[str, int]:
    """Longest path, in edges, from any entry task to each task."""
    parents = spec.parents()
    levels: dict[str, int] = {}

    def level(tid: str) -> int:
        if tid not in levels:
            # iterative deepening to avoid recursion limits on deep pipelines
            stack = [tid]
            while stack:
                cur = stack[-1]
                pending = [q for q in parents[cur] if q not in levels]
                if pending:
                    stack.extend(pending)
                    continue
                stack.pop()
                levels[cur] = 1 + max((levels[q] for q in parents[cur]), default=-1)
        return levels[tid]

    for t in spec.tasks:
        level(t.id)
    return {t.id: levels[t.id] for t in spec.tasks}


def task_costs(spec: WorkflowSpec, w_t: float | Mapping[str, float]) -> list[TaskCost]:
    """Per-task costs from file sizes; ``w_t`` is one value or a per-task map."""
    sizes = {f.id: f.size_bytes for f in spec.files}
    out = []
    for t in spec.tasks:
        w = w_t[t.id] if isinstance(w_t, Mapping) else w_t
        out.append(
            TaskCost(
                t.id,
                float(w),
                float(sum(sizes[f] for f in t.inputs)),
                float(sum(sizes[f] for f in t.outputs)),
            )
        )
    return out


def aggregate(costs: Iterable[TaskCost]) -> WorkloadAggregate:
    r = w = work = 0.0
    for c in costs:
        r += c.read_bytes
        w += c.write_bytes
        work += c.w_t
    return WorkloadAggregate(r, w, work)


def _solo_time(c: TaskCost, plat: PlatformModel) -> float:
    return c.w_t + c.read_bytes / plat.bw_read + c.write_bytes / plat.bw_write


def _batch_time(batch: list[TaskCost], plat: PlatformModel) -> float:
    slots = plat.n * plat.p
    if len(batch) == slots:
        m = plat.p
    else:
        m = min(plat.p, math.ceil(len(batch) / plat.n))
    total = 0.0
    for c in batch:
        total += c.w_t + c.read_bytes * m / plat.bw_read + c.write_bytes * m / plat.bw_write
    return total / len(batch)


def level_makespan(costs: list[TaskCost], plat: PlatformModel) -> float:
    """Estimated time of one level: batches in longest-first order, each batch
    costing the mean time of its tasks."""
    order = sorted(costs, key=lambda c: (-_solo_time(c, plat), c.task_id))
    slots = plat.n * plat.p
    total = 0.0
    for i in range(0, len(order), slots):
        total += _batch_time(order[i : i + slots], plat)
    return total


def per_level(spec: WorkflowSpec, plat: PlatformModel, costs: Iterable[TaskCost]) -> float:
    by_id = {c.task_id: c for c in costs}
    missing = [t.id for t in spec.tasks if t.id not in by_id]
    if missing:
        raise ModelError(f"no cost for task(s): {', '.join(missing[:5])}")
    levels = top_levels(spec)
    grouped: dict[int, list[TaskCost]] = {}
    for t in spec.tasks:
        grouped.setdefault(levels[t.id], []).append(by_id[t.id])
    total = 0.0
    for lvl in sorted(grouped):
        total += level_makespan(grouped[lvl], plat)
    return total


def add_overhead(estimate: float, overhead: float) -> float:
    if estimate < 0 or overhead < 0:
        raise ModelError("estimate and overhead must be non-negative")
    return estimate + overhead


def nodes_for_tasks(num_tasks: int) -> int:
    """Node count for a run: ceil(0.1 * tasks / 40), at least one."""
    if num_tasks <= 0:
        raise ModelError("num_tasks must be positive")
    return max(1, -(-num_tasks // 400))


MODELS = ("macro-no-overlap", "macro-overlap", "per-level")


def estimate(spec: WorkflowSpec, plat: PlatformModel, model: str, costs: list[TaskCost]) -> float:
    if model == "per-level":
        return per_level(spec, plat, costs)
    agg = aggregate(costs)
    if model == "macro-no-overlap":
        return macro_no_overlap(agg, plat)
    if model == "macro-overlap":
        return macro_overlap(agg, plat)
    raise ModelError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
