"""Recovering a recipe from several instances of the same application.

Every task gets a structural class: a hash of its category, the distinct
classes below it and the distinct classes above it.  Because only distinct
neighbour classes enter the hash, adding more copies of a repeated sub-DAG
leaves every class unchanged.  Classes whose population grows from the
smallest to the largest instance belong to repeated units; the connected
pieces they form in the largest instance are the patterns.

Limitation: a pattern that attaches to a task of a growing class (for
example a new branch hanging off an existing copy) merges with that copy and
cannot be separated.  Such inputs raise :class:`RecipeError` instead of
returning a recipe that would not reproduce them.
"""

from __future__ import annotations

import graphlib
import hashlib
import math
from collections import Counter, defaultdict
from typing import Sequence

from .model import Pattern, Recipe, RecipeError, TypedDag


def _h(*parts) -> str:
    return hashlib.sha1(repr(parts).encode()).hexdigest()[:16]


def _directional(dag: TypedDag, neighbours: dict[str, set[str]], order: list[str]) -> dict[str, str]:
    sig: dict[str, str] = {}
    for t in order:
        sig[t] = _h(dag.tasks[t], tuple(sorted({sig[n] for n in neighbours[t]})))
    return sig


def task_classes(dag: TypedDag) -> dict[str, str]:
    parents, children = dag.parents(), dag.children()
    topo = list(graphlib.TopologicalSorter(parents).static_order())
    down = _directional(dag, children, topo[::-1])
    up = _directional(dag, parents, topo)
    return {t: _h(down[t], up[t]) for t in dag.tasks}


def _components(nodes: set[str], dag: TypedDag) -> list[list[str]]:
    adj: dict[str, set[str]] = defaultdict(set)
    for p, c in dag.edges:
        if p in nodes and c in nodes:
            adj[p].add(c)
            adj[c].add(p)
    seen: set[str] = set()
    out = []
    for start in sorted(nodes):
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        out.append(sorted(comp))
    return out


def _component_key(comp: list[str], dag: TypedDag, cls: dict[str, str]) -> str:
    members = set(comp)
    internal = sorted((cls[p], cls[c]) for p, c in dag.edges if p in members and c in members)
    return _h(tuple(sorted(cls[t] for t in comp)), tuple(internal))


def detect_patterns(instances: Sequence[TypedDag], name: str = "detected") -> Recipe:
    """Recipe whose base graph is the smallest instance and whose patterns
    are the repeated units that account for growth to the largest one."""
    if len(instances) < 2:
        raise RecipeError("need at least two instances")
    for i, inst in enumerate(instances):
        problems = inst.problems()
        if problems:
            raise RecipeError(f"instance {i}: " + "; ".join(problems))
    cat_sets = [set(inst.tasks.values()) for inst in instances]
    if not set.intersection(*cat_sets):
        raise RecipeError("instances share no task categories; they cannot be the same application")

    ordered = sorted(instances, key=len)
    small, large = ordered[0], ordered[-1]
    cls_small, cls_large = task_classes(small), task_classes(large)
    n_small, n_large = Counter(cls_small.values()), Counter(cls_large.values())
    shrinking = [c for c in n_small if n_large[c] < n_small[c]]
    if shrinking:
        raise RecipeError("the smallest instance is not contained in the largest one")
    growing = {c for c in n_large if n_large[c] > n_small[c]}

    comps_large = _components({t for t, c in cls_large.items() if c in growing}, large)
    comps_small = _components({t for t, c in cls_small.items() if c in growing}, small)
    count_small = Counter(_component_key(c, small, cls_small) for c in comps_small)
    first: dict[str, list[str]] = {}
    count_large: Counter = Counter()
    for comp in comps_large:
        key = _component_key(comp, large, cls_large)
        first.setdefault(key, comp)
        count_large[key] += 1
    delta = {k: count_large[k] - count_small[k] for k in first if count_large[k] > count_small[k]}

    explained: Counter = Counter()
    for k, d in delta.items():
        for t in first[k]:
            explained[cls_large[t]] += d
    if any(explained[c] != n_large[c] - n_small[c] for c in growing):
        raise RecipeError("growth between instances is not a whole number of copies of separable units")

    # non-growing classes map to the small instance by rank within the class
    by_class_small: dict[str, list[str]] = defaultdict(list)
    for t in sorted(small.tasks):
        by_class_small[cls_small[t]].append(t)
    rank_large: dict[str, int] = {}
    seen_rank: Counter = Counter()
    for t in sorted(large.tasks):
        rank_large[t] = seen_rank[cls_large[t]]
        seen_rank[cls_large[t]] += 1

    def to_base(t: str) -> str:
        return by_class_small[cls_large[t]][rank_large[t]]

    g = math.gcd(*delta.values()) if delta else 1
    patterns = []
    for i, key in enumerate(sorted(delta, key=lambda k: first[k][0])):
        comp = first[key]
        local = {t: f"p{j}" for j, t in enumerate(comp)}
        members = set(comp)
        tasks = {local[t]: large.tasks[t] for t in comp}
        edges = frozenset((local[p], local[c]) for p, c in large.edges if p in members and c in members)
        attach_in = tuple(sorted((to_base(p), local[c]) for p, c in large.edges if c in members and p not in members))
        attach_out = tuple(sorted((local[p], to_base(c)) for p, c in large.edges if p in members and c not in members))
        patterns.append(Pattern(f"pattern_{i}", TypedDag(tasks, edges), attach_in, attach_out, delta[key] // g))
    return Recipe(name, small, tuple(patterns))
