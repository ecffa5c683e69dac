"""Recipe data model and JSON loading."""

from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping


class RecipeError(ValueError):
    pass


@dataclass(frozen=True)
class TypedDag:
    """Tasks labelled with categories plus direct dependency edges."""

    tasks: Mapping[str, str]  # id -> category
    edges: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "tasks", dict(self.tasks))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))

    def __len__(self) -> int:
        return len(self.tasks)

    def children(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {t: set() for t in self.tasks}
        for p, c in self.edges:
            out[p].add(c)
        return out

    def parents(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {t: set() for t in self.tasks}
        for p, c in self.edges:
            out[c].add(p)
        return out

    def category_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for cat in self.tasks.values():
            out[cat] = out.get(cat, 0) + 1
        return out

    def problems(self) -> list[str]:
        v = [f"edge {p} -> {c} names an unknown task" for p, c in sorted(self.edges)
             if p not in self.tasks or c not in self.tasks]
        v += [f"self-loop on {p}" for p, c in sorted(self.edges) if p == c]
        if not v:
            try:
                tuple(graphlib.TopologicalSorter(self.parents()).static_order())
            except graphlib.CycleError as exc:
                v.append("cycle: " + " -> ".join(reversed(exc.args[1])))
        return v

    @classmethod
    def from_spec(cls, spec) -> "TypedDag":
        return cls({t.id: t.category for t in spec.tasks}, frozenset(spec.edges()))

    def to_dict(self) -> dict[str, Any]:
        return {
            "tasks": [{"id": t, "category": c} for t, c in self.tasks.items()],
            "edges": [list(e) for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TypedDag":
        return cls({t["id"]: t["category"] for t in d["tasks"]}, frozenset(tuple(e) for e in d["edges"]))


@dataclass(frozen=True)
class Pattern:
    """A sub-DAG added as a whole; ``attach_in`` edges run base -> pattern and
    ``attach_out`` edges pattern -> base.  ``weight`` sets how often it is
    replicated relative to the other patterns."""

    name: str
    graph: TypedDag
    attach_in: tuple[tuple[str, str], ...] = ()
    attach_out: tuple[tuple[str, str], ...] = ()
    weight: int = 1

    def __len__(self) -> int:
        return len(self.graph)


@dataclass(frozen=True)
class Recipe:
    name: str
    base_graph: TypedDag
    patterns: tuple[Pattern, ...] = field(default=())

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise RecipeError(f"recipe {self.name!r}: " + "; ".join(problems))

    @property
    def min_tasks(self) -> int:
        return len(self.base_graph)

    @property
    def largest_pattern(self) -> int:
        return max((len(p) for p in self.patterns), default=0)

    def problems(self) -> list[str]:
        v = [f"base graph: {x}" for x in self.base_graph.problems()]
        if not self.base_graph.tasks:
            v.append("base graph is empty")
        base = self.base_graph.tasks
        for pat in self.patterns:
            own = pat.graph.tasks
            v += [f"pattern {pat.name}: {x}" for x in pat.graph.problems()]
            if not own:
                v.append(f"pattern {pat.name} is empty")
            if not isinstance(pat.weight, int) or pat.weight < 1:
                v.append(f"pattern {pat.name} has invalid weight {pat.weight!r}")
            for b, t in pat.attach_in:
                if b not in base:
                    v.append(f"pattern {pat.name} attaches from unknown base task {b}")
                if t not in own:
                    v.append(f"pattern {pat.name} attaches to unknown pattern task {t}")
            for t, b in pat.attach_out:
                if b not in base:
                    v.append(f"pattern {pat.name} attaches to unknown base task {b}")
                if t not in own:
                    v.append(f"pattern {pat.name} attaches from unknown pattern task {t}")
        if not v:
            # a single copy of every pattern must leave the graph acyclic
            for pat in self.patterns:
                tasks = dict(base)
                tasks.update({("#", t): c for t, c in pat.graph.tasks.items()})
                edges = set(self.base_graph.edges)
                edges |= {(("#", p), ("#", c)) for p, c in pat.graph.edges}
                edges |= {(b, ("#", t)) for b, t in pat.attach_in}
                edges |= {(("#", t), b) for t, b in pat.attach_out}
                parents: dict[Any, set] = {t: set() for t in tasks}
                for p, c in edges:
                    parents[c].add(p)
                try:
                    tuple(graphlib.TopologicalSorter(parents).static_order())
                except graphlib.CycleError:
                    v.append(f"pattern {pat.name} creates a cycle with the base graph")
        return v

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "base_graph": self.base_graph.to_dict(),
            "patterns": [
                {
                    "name": p.name,
                    **p.graph.to_dict(),
                    "attach_in": [list(e) for e in p.attach_in],
                    "attach_out": [list(e) for e in p.attach_out],
                    "weight": p.weight,
                }
                for p in self.patterns
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Recipe":
        try:
            patterns = tuple(
                Pattern(
                    name=p["name"],
                    graph=TypedDag.from_dict(p),
                    attach_in=tuple(tuple(e) for e in p.get("attach_in", ())),
                    attach_out=tuple(tuple(e) for e in p.get("attach_out", ())),
                    weight=p.get("weight", 1),
                )
                for p in d.get("patterns", ())
            )
            return cls(d["name"], TypedDag.from_dict(d["base_graph"]), patterns)
        except (KeyError, TypeError) as exc:
            raise RecipeError(f"malformed recipe: missing or bad field {exc}") from exc


SHIPPED = ("blast", "cycles", "epigenomics", "montage", "soykb")


def available_recipes() -> tuple[str, ...]:
    return SHIPPED


def load_recipe(name_or_path: str | Path) -> Recipe:
    """A shipped recipe by name, or a recipe JSON file by path."""
    if str(name_or_path) in SHIPPED:
        text = resources.files("wfforge.recipes").joinpath("data", f"{name_or_path}.json").read_text("utf-8")
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise RecipeError(f"unknown recipe {str(name_or_path)!r}; shipped recipes: {', '.join(SHIPPED)}")
        text = path.read_text("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecipeError(f"{name_or_path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return Recipe.from_dict(data)
