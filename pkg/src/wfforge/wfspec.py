"""Workflow benchmark data model, JSON file format and structural validation.

A :class:`WorkflowSpec` is the complete description of a benchmark: tasks,
their kernel parameters and the files they read and write.  Dependencies are
never stored as edges; a task depends on another exactly when it reads a file
the other one writes.
"""

from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import jsonschema

__all__ = [
    "FileSpec",
    "TaskParams",
    "TaskSpec",
    "Provenance",
    "WorkflowSpec",
    "ValidationReport",
    "SpecError",
    "SpecParseError",
    "InvalidSpecError",
    "validate",
    "total_footprint",
    "serialize",
    "parse",
    "load",
    "dump",
    "is_tenth",
    "SPEC_SCHEMA",
]


class SpecError(ValueError):
    """Base class for workflow specification errors."""


class SpecParseError(SpecError):
    """Malformed or schema-violating spec text."""


class InvalidSpecError(SpecError):
    """Spec parsed fine but breaks one or more structural invariants."""

    def __init__(self, violations: Iterable[str]):
        self.violations = tuple(violations)
        super().__init__("invalid workflow spec: " + "; ".join(self.violations))


def is_tenth(value: float) -> bool:
    """True if *value* is one of 0.0, 0.1, ..., 1.0."""
    scaled = value * 10
    return 0.0 <= value <= 1.0 and abs(scaled - round(scaled)) <= 1e-9


@dataclass(frozen=True)
class FileSpec:
    id: str
    size_bytes: int = 0


@dataclass(frozen=True)
class TaskParams:
    """Kernel configuration of one task.

    ``f`` is the fraction of each core's 10 workers that run the CPU kernel;
    the rest run the memory kernel.
    """

    cores: int = 1
    cpuwork: float = 0.0
    memwork: float = 0.0
    f: float = 1.0

    @property
    def cpu_workers_per_core(self) -> int:
        return int(round(self.f * 10))

    @property
    def mem_workers_per_core(self) -> int:
        return 10 - self.cpu_workers_per_core

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.cores, int) or self.cores < 1:
            out.append(f"cores must be a positive integer, got {self.cores!r}")
        if self.cpuwork < 0:
            out.append(f"cpuwork must be non-negative, got {self.cpuwork!r}")
        if self.memwork < 0:
            out.append(f"memwork must be non-negative, got {self.memwork!r}")
        if not is_tenth(self.f):
            out.append(f"f must be a multiple of 0.1 in [0, 1], got {self.f!r}")
        return out


@dataclass(frozen=True)
class TaskSpec:
    id: str
    category: str
    params: TaskParams = field(default_factory=TaskParams)
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Provenance:
    recipe: str = ""
    requested_tasks: int = 0
    requested_footprint_bytes: int = 0
    seed: int = 0


@dataclass(frozen=True)
class WorkflowSpec:
    name: str
    tasks: tuple[TaskSpec, ...] = ()
    files: tuple[FileSpec, ...] = ()
    provenance: Provenance = field(default_factory=Provenance)

    def file_map(self) -> dict[str, FileSpec]:
        return {f.id: f for f in self.files}

    def task_map(self) -> dict[str, TaskSpec]:
        return {t.id: t for t in self.tasks}

    def producers(self) -> dict[str, str]:
        """file id -> producing task id (first producer wins on invalid specs)."""
        out: dict[str, str] = {}
        for t in self.tasks:
            for fid in t.outputs:
                out.setdefault(fid, t.id)
        return out

    def parents(self) -> dict[str, set[str]]:
        """task id -> ids of tasks producing one of its inputs."""
        prod = self.producers()
        return {
            t.id: {prod[fid] for fid in t.inputs if fid in prod and prod[fid] != t.id}
            for t in self.tasks
        }

    def edges(self) -> set[tuple[str, str]]:
        return {(p, c) for c, ps in self.parents().items() for p in ps}

    def workflow_inputs(self) -> list[str]:
        """Ids of files read by some task but produced by none."""
        prod = self.producers()
        seen: dict[str, None] = {}
        for t in self.tasks:
            for fid in t.inputs:
                if fid not in prod:
                    seen.setdefault(fid)
        return list(seen)

    def with_file_sizes(self, sizes: dict[str, int]) -> "WorkflowSpec":
        files = tuple(replace(f, size_bytes=sizes.get(f.id, f.size_bytes)) for f in self.files)
        return replace(self, files=files)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(spec: WorkflowSpec) -> ValidationReport:
    v: list[str] = []

    file_ids: set[str] = set()
    for f in spec.files:
        if f.id in file_ids:
            v.append(f"duplicate file id {f.id}")
        file_ids.add(f.id)
        if not isinstance(f.size_bytes, int) or f.size_bytes < 0:
            v.append(f"file {f.id} has invalid size {f.size_bytes!r}")

    task_ids: set[str] = set()
    producers: dict[str, list[str]] = {}
    for t in spec.tasks:
        if t.id in task_ids:
            v.append(f"duplicate task id {t.id}")
        task_ids.add(t.id)
        v.extend(f"task {t.id}: {p}" for p in t.params.problems())
        for kind, refs in (("input", t.inputs), ("output", t.outputs)):
            seen: set[str] = set()
            for fid in refs:
                if fid in seen:
                    v.append(f"task {t.id} lists {kind} file {fid} more than once")
                seen.add(fid)
                if fid not in file_ids:
                    v.append(f"task {t.id} references unknown file {fid}")
        for fid in sorted(set(t.inputs) & set(t.outputs)):
            v.append(f"task {t.id} lists file {fid} as both input and output")
        for fid in dict.fromkeys(t.outputs):
            producers.setdefault(fid, []).append(t.id)

    for fid, ps in producers.items():
        if len(ps) > 1:
            count = "two" if len(ps) == 2 else str(len(ps))
            v.append(f"file {fid} has {count} producers: {', '.join(ps)}")

    graph: dict[str, set[str]] = {t.id: set() for t in spec.tasks}
    for t in spec.tasks:
        for fid in t.inputs:
            for p in producers.get(fid, ()):
                if p != t.id:
                    graph[t.id].add(p)
    try:
        tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        v.append("cycle: " + " -> ".join(reversed(cycle)))

    return ValidationReport(tuple(v))


def total_footprint(spec: WorkflowSpec) -> int:
    """Sum of sizes of the distinct files read or written by at least one task."""
    sizes = spec.file_map()
    used: set[str] = set()
    for t in spec.tasks:
        used.update(t.inputs)
        used.update(t.outputs)
    return sum(sizes[fid].size_bytes for fid in used if fid in sizes)


# --- serialization -----------------------------------------------------------

_STR_LIST = {"type": "array", "items": {"type": "string"}}

SPEC_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "provenance", "files", "tasks"],
    "properties": {
        "name": {"type": "string"},
        "provenance": {
            "type": "object",
            "additionalProperties": False,
            "required": ["recipe", "requested_tasks", "requested_footprint_bytes", "seed"],
            "properties": {
                "recipe": {"type": "string"},
                "requested_tasks": {"type": "integer"},
                "requested_footprint_bytes": {"type": "integer"},
                "seed": {"type": "integer"},
            },
        },
        "files": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "size_bytes"],
                "properties": {"id": {"type": "string"}, "size_bytes": {"type": "integer"}},
            },
        },
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "category", "cores", "cpuwork", "memwork", "f", "inputs", "outputs"],
                "properties": {
                    "id": {"type": "string"},
                    "category": {"type": "string"},
                    "cores": {"type": "integer"},
                    "cpuwork": {"type": "number"},
                    "memwork": {"type": "number"},
                    "f": {"type": "number"},
                    "inputs": _STR_LIST,
                    "outputs": _STR_LIST,
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SPEC_SCHEMA)


def _num(x: float) -> int | float:
    x = float(x)
    return int(x) if x.is_integer() else x


def to_dict(spec: WorkflowSpec) -> dict[str, Any]:
    p = spec.provenance
    return {
        "name": spec.name,
        "provenance": {
            "recipe": p.recipe,
            "requested_tasks": p.requested_tasks,
            "requested_footprint_bytes": p.requested_footprint_bytes,
            "seed": p.seed,
        },
        "files": [{"id": f.id, "size_bytes": f.size_bytes} for f in spec.files],
        "tasks": [
            {
                "id": t.id,
                "category": t.category,
                "cores": t.params.cores,
                "cpuwork": _num(t.params.cpuwork),
                "memwork": _num(t.params.memwork),
                "f": _num(round(t.params.f, 1)),
                "inputs": list(t.inputs),
                "outputs": list(t.outputs),
            }
            for t in spec.tasks
        ],
    }


def _error_path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def from_dict(data: Any) -> WorkflowSpec:
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise SpecParseError("; ".join(f"{_error_path(e)}: {e.message}" for e in errors))
    p = data["provenance"]
    return WorkflowSpec(
        name=data["name"],
        provenance=Provenance(
            recipe=p["recipe"],
            requested_tasks=int(p["requested_tasks"]),
            requested_footprint_bytes=int(p["requested_footprint_bytes"]),
            seed=int(p["seed"]),
        ),
        files=tuple(FileSpec(f["id"], int(f["size_bytes"])) for f in data["files"]),
        tasks=tuple(
            TaskSpec(
                id=t["id"],
                category=t["category"],
                params=TaskParams(
                    cores=int(t["cores"]),
                    cpuwork=float(t["cpuwork"]),
                    memwork=float(t["memwork"]),
                    f=float(t["f"]),
                ),
                inputs=tuple(t["inputs"]),
                outputs=tuple(t["outputs"]),
            )
            for t in data["tasks"]
        ),
    )


def serialize(spec: WorkflowSpec) -> str:
    report = validate(spec)
    if not report.ok:
        raise InvalidSpecError(report.violations)
    return json.dumps(to_dict(spec), indent=2) + "\n"


def parse(text: str, check: bool = True) -> WorkflowSpec:
    """Parse spec text.  Raises :class:`SpecParseError` on malformed JSON or
    schema mismatch, and (when *check*) :class:`InvalidSpecError` if the
    result breaks a structural invariant."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    spec = from_dict(data)
    if check:
        report = validate(spec)
        if not report.ok:
            raise InvalidSpecError(report.violations)
    return spec


def load(path, check: bool = True) -> WorkflowSpec:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), check=check)


def dump(spec: WorkflowSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(spec))
