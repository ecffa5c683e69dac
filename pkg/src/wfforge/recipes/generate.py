"""Growing a recipe to a requested task count and sizing its files."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

from ..wfspec import FileSpec, Provenance, TaskParams, TaskSpec, WorkflowSpec
from .model import Recipe, RecipeError


@dataclass(frozen=True)
class GenerationRequest:
    recipe: Recipe
    num_tasks: int
    footprint_bytes: int | None = None  # None or 0 leaves every file at 0 bytes
    default_params: TaskParams = field(default_factory=TaskParams)
    category_params: Mapping[str, TaskParams] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.num_tasks < self.recipe.min_tasks:
            raise RecipeError(
                f"recipe {self.recipe.name} needs at least min_tasks={self.recipe.min_tasks} tasks, "
                f"got {self.num_tasks}"
            )
        if self.footprint_bytes is not None and self.footprint_bytes < 0:
            raise RecipeError("footprint_bytes must be non-negative")

    def params_for(self, category: str) -> TaskParams:
        return self.category_params.get(category, self.default_params)


def growth_sequence(recipe: Recipe, limit: int) -> list[tuple[int, tuple[int, ...]]]:
    """Reachable (task count, copies per pattern) states in growth order.

    Each step adds one copy of the pattern whose next copy keeps the counts
    closest to the weight proportions: smallest ``(copies + 1) / weight``,
    ties to the earlier pattern.  Stops at the first state with at least
    ``limit`` tasks.
    """
    copies = [0] * len(recipe.patterns)
    size = recipe.min_tasks
    states = [(size, tuple(copies))]
    if not recipe.patterns:
        return states
    while size < limit:
        i = min(range(len(copies)), key=lambda j: (Fraction(copies[j] + 1, recipe.patterns[j].weight), j))
        copies[i] += 1
        size += len(recipe.patterns[i])
        states.append((size, tuple(copies)))
    return states


def plan_copies(recipe: Recipe, num_tasks: int) -> list[int]:
    """Pattern index of each copy to add, for the reachable size nearest
    ``num_tasks`` (ties go to the smaller size)."""
    states = growth_sequence(recipe, num_tasks)
    best = min(range(len(states)), key=lambda k: (abs(states[k][0] - num_tasks), states[k][0]))
    order = []
    for (_, a), (_, b) in zip(states[:best], states[1 : best + 1]):
        order.append(next(i for i in range(len(a)) if a[i] != b[i]))
    return order


def generate(req: GenerationRequest) -> WorkflowSpec:
    recipe = req.recipe
    cats: list[str] = []
    edges: list[tuple[int, int]] = []
    base_ix = {}
    for tid, cat in recipe.base_graph.tasks.items():
        base_ix[tid] = len(cats)
        cats.append(cat)
    edges += [(base_ix[p], base_ix[c]) for p, c in recipe.base_graph.edges]
    for pi in plan_copies(recipe, req.num_tasks):
        pat = recipe.patterns[pi]
        local = {}
        for tid, cat in pat.graph.tasks.items():
            local[tid] = len(cats)
            cats.append(cat)
        edges += [(local[p], local[c]) for p, c in pat.graph.edges]
        edges += [(base_ix[b], local[t]) for b, t in pat.attach_in]
        edges += [(local[t], base_ix[b]) for t, b in pat.attach_out]

    ids = [f"{cat}_{i:08d}" for i, cat in enumerate(cats)]
    parents: list[set[int]] = [set() for _ in cats]
    for p, c in edges:
        parents[c].add(p)

    tasks, files = [], []
    for i, tid in enumerate(ids):
        ins = [f"{ids[p]}_output" for p in sorted(parents[i])]
        if not parents[i]:
            ins.append(f"{tid}_input")
            files.append(FileSpec(f"{tid}_input", 0))
        files.append(FileSpec(f"{tid}_output", 0))
        tasks.append(TaskSpec(tid, cats[i], req.params_for(cats[i]), tuple(ins), (f"{tid}_output",)))

    spec = WorkflowSpec(
        name=f"{recipe.name}-{len(tasks)}",
        tasks=tuple(tasks),
        files=tuple(files),
        provenance=Provenance(recipe.name, req.num_tasks, req.footprint_bytes or 0, req.seed),
    )
    if req.footprint_bytes:
        spec = distribute_footprint(spec, req.footprint_bytes)
    return spec


def distribute_footprint(spec: WorkflowSpec, footprint_bytes: int) -> WorkflowSpec:
    """Equal integer sizes summing to ``footprint_bytes``; leftover bytes go
    one each to the first files in id order."""
    n = len(spec.files)
    if n == 0:
        raise RecipeError("spec has no files to size")
    if footprint_bytes < n:
        raise RecipeError(f"footprint of {footprint_bytes} bytes is smaller than the {n} files (1 byte minimum each)")
    share, rem = divmod(int(footprint_bytes), n)
    extra = set(sorted(f.id for f in spec.files)[:rem])
    files = tuple(replace(f, size_bytes=share + (f.id in extra)) for f in spec.files)
    return replace(spec, files=files)
