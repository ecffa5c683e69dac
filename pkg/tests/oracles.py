"""Independent reference implementations used only by tests."""

from __future__ import annotations

import random
from fractions import Fraction

from wfforge.models import TaskCost
from wfforge.wfspec import FileSpec, Provenance, TaskParams, TaskSpec, WorkflowSpec


def exact_macro(data_read, data_write, work, n, p, bw_read, bw_write):
    """Both macro-task formulas in exact rational arithmetic."""
    q = [Fraction(x) for x in (data_read, data_write, work, n, p, bw_read, bw_write)]
    dr, dw, wk, n, p, br, bw = q
    io = dr / (n * br) + dw / (n * bw)
    return io + wk / (n * p), max(wk / (n * p), io)


def brute_levels(spec):
    """Top levels by relaxing every edge until nothing changes."""
    edges = set()
    prod = {}
    for t in spec.tasks:
        for f in t.outputs:
            prod[f] = t.id
    for t in spec.tasks:
        for f in t.inputs:
            if f in prod:
                edges.add((prod[f], t.id))
    lvl = {t.id: 0 for t in spec.tasks}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            if lvl[b] < lvl[a] + 1:
                lvl[b] = lvl[a] + 1
                changed = True
    return lvl


def brute_per_level(spec, n, p, bw_read, bw_write, costs):
    """Literal batch-by-batch evaluation of the per-level model."""
    cost = {c.task_id: c for c in costs}
    lvl = brute_levels(spec)
    total = 0.0
    for level in range(max(lvl.values()) + 1):
        remaining = [t for t in lvl if lvl[t] == level]
        ordered = []
        while remaining:  # selection sort: longest solo time first, then smallest id
            best = remaining[0]
            for t in remaining[1:]:
                c, b = cost[t], cost[best]
                tc = c.w_t + c.read_bytes / bw_read + c.write_bytes / bw_write
                tb = b.w_t + b.read_bytes / bw_read + b.write_bytes / bw_write
                if tc > tb or (tc == tb and t < best):
                    best = t
            ordered.append(best)
            remaining.remove(best)
        level_time = 0.0
        start = 0
        while start < len(ordered):
            batch = ordered[start : start + n * p]
            start += n * p
            if len(batch) == n * p:
                m = p
            else:
                m = (len(batch) + n - 1) // n
                if m > p:
                    m = p
            s = 0.0
            for t in batch:
                c = cost[t]
                s += c.w_t + c.read_bytes * m / bw_read + c.write_bytes * m / bw_write
            level_time += s / len(batch)
        total += level_time
    return total


def random_level_spec(rng: random.Random, max_tasks=50, max_levels=3):
    """A random valid spec with at most ``max_levels`` levels, plus random costs."""
    n_tasks = rng.randint(1, max_tasks)
    n_levels = rng.randint(1, min(max_levels, n_tasks))
    assigned = [i % n_levels for i in range(n_tasks)]  # every level populated
    rng.shuffle(assigned)
    by_level: dict[int, list[str]] = {}
    tasks = []
    files = [FileSpec("input", rng.randint(0, 10**9))]
    for i, lvl in sorted(enumerate(assigned), key=lambda x: (x[1], x[0])):
        tid = f"t{i:03d}"
        out = f"{tid}.out"
        files.append(FileSpec(out, rng.randint(0, 10**9)))
        if lvl == 0:
            ins = ("input",) if rng.random() < 0.7 else ()
        else:
            must = rng.choice(by_level[lvl - 1])
            extra = [x for l2 in range(lvl) for x in by_level[l2] if x != must]
            picks = [must] + rng.sample(extra, min(len(extra), rng.randint(0, 2)))
            ins = tuple(f"{x}.out" for x in picks)
        tasks.append(TaskSpec(tid, "c", TaskParams(), ins, (out,)))
        by_level.setdefault(lvl, []).append(tid)
    spec = WorkflowSpec("rand", tuple(tasks), tuple(files), Provenance())
    costs = [
        TaskCost(t.id, rng.choice([rng.uniform(0, 100), 20.62]), rng.uniform(0, 5e9), rng.uniform(0, 5e8))
        for t in tasks
    ]
    # some exact ties to exercise the id tie-break
    if len(costs) > 3:
        costs[1] = TaskCost(costs[1].task_id, costs[0].w_t, costs[0].read_bytes, costs[0].write_bytes)
    return spec, costs, n_levels


def _simulate_node(jobs, bw_read, bw_write):
    """Fluid event simulation of tasks co-located on one node.

    Each job is ``[read_bytes, compute_seconds, write_bytes]``. Tasks in the
    same I/O phase share that direction's bandwidth equally; computation does
    not contend. Returns the time the last task finishes.
    """
    state = [[0, list(j)] for j in jobs]  # phase index, remaining amounts
    now = 0.0
    while True:
        for s in state:
            while s[0] < 3 and s[1][s[0]] <= 0:
                s[0] += 1
        active = [s for s in state if s[0] < 3]
        if not active:
            return now
        readers = sum(s[0] == 0 for s in active)
        writers = sum(s[0] == 2 for s in active)
        rates = {0: bw_read / readers if readers else 0, 1: 1.0, 2: bw_write / writers if writers else 0}
        step = min(s[1][s[0]] / rates[s[0]] for s in active)
        for s in active:
            s[1][s[0]] -= step * rates[s[0]]
            if s[1][s[0]] <= 1e-9 * max(1.0, step * rates[s[0]]):
                s[1][s[0]] = 0
        now += step


def simulate_per_level(spec, n, p, bw_read, bw_write, costs):
    """Event simulation of level-by-level batches, tasks spread round-robin
    over nodes; a batch ends when its slowest node does."""
    cost = {c.task_id: c for c in costs}
    lvl = brute_levels(spec)
    total = 0.0
    for level in sorted(set(lvl.values())):
        ids = [t for t in lvl if lvl[t] == level]
        ids.sort(key=lambda t: (-(cost[t].w_t + cost[t].read_bytes / bw_read + cost[t].write_bytes / bw_write), t))
        for start in range(0, len(ids), n * p):
            batch = ids[start : start + n * p]
            nodes = [batch[k::n] for k in range(n)]
            total += max(
                _simulate_node([[cost[t].read_bytes, cost[t].w_t, cost[t].write_bytes] for t in node],
                               bw_read, bw_write)
                for node in nodes if node
            )
    return total
