import json
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import MB, chain_spec
from wfforge.wfspec import (
    FileSpec,
    InvalidSpecError,
    SpecParseError,
    TaskParams,
    TaskSpec,
    WorkflowSpec,
    is_tenth,
    parse,
    serialize,
    total_footprint,
    validate,
)


def test_chain_is_valid():
    assert validate(chain_spec()).ok


def test_two_producers():
    files = (FileSpec("f1"),)
    tasks = (TaskSpec("A", "x", outputs=("f1",)), TaskSpec("B", "x", outputs=("f1",)))
    report = validate(WorkflowSpec("w", tasks, files))
    assert not report.ok
    assert any("file f1 has two producers" in v for v in report.violations)


def test_two_cycle():
    files = (FileSpec("f1"), FileSpec("f2"))
    tasks = (
        TaskSpec("A", "x", inputs=("f1",), outputs=("f2",)),
        TaskSpec("B", "x", inputs=("f2",), outputs=("f1",)),
    )
    report = validate(WorkflowSpec("w", tasks, files))
    assert any(v.startswith("cycle") for v in report.violations)
    assert any("A" in v and "B" in v for v in report.violations if v.startswith("cycle"))


@pytest.mark.parametrize(
    "task, needle",
    [
        (TaskSpec("A", "x", inputs=("nope",)), "unknown file nope"),
        (TaskSpec("A", "x", inputs=("f0",), outputs=("f0",)), "both input and output"),
        (TaskSpec("A", "x", inputs=("f0", "f0")), "more than once"),
        (TaskSpec("A", "x", TaskParams(cores=0)), "cores"),
        (TaskSpec("A", "x", TaskParams(f=0.25)), "multiple of 0.1"),
        (TaskSpec("A", "x", TaskParams(cpuwork=-1)), "cpuwork"),
    ],
)
def test_violations_name_offenders(task, needle):
    report = validate(WorkflowSpec("w", (task,), (FileSpec("f0"),)))
    assert any(needle in v and "A" in v for v in report.violations), report.violations


def test_duplicate_ids():
    spec = WorkflowSpec("w", (TaskSpec("A", "x"), TaskSpec("A", "x")), (FileSpec("f"), FileSpec("f")))
    vs = validate(spec).violations
    assert "duplicate task id A" in vs and "duplicate file id f" in vs


def test_input_shared_by_many_levels_is_fine():
    files = (FileSpec("in"), FileSpec("a"))
    tasks = (
        TaskSpec("A", "x", inputs=("in",), outputs=("a",)),
        TaskSpec("B", "x", inputs=("in", "a")),
    )
    assert validate(WorkflowSpec("w", tasks, files)).ok


def test_is_tenth():
    assert all(is_tenth(i / 10) for i in range(11))
    assert not is_tenth(0.05) and not is_tenth(1.1) and not is_tenth(-0.1)


class TestFootprint:
    def test_empty(self):
        assert total_footprint(WorkflowSpec("w")) == 0

    def test_figure_example(self, fig_spec):
        assert validate(fig_spec).ok
        assert len(fig_spec.tasks) == 9 and len(fig_spec.files) == 19
        assert total_footprint(fig_spec) == 1700 * MB

    def test_shared_file_counted_once(self):
        files = (FileSpec("in", 5), FileSpec("s", 10))
        tasks = (TaskSpec("P", "x", inputs=("in",), outputs=("s",)),) + tuple(
            TaskSpec(f"C{i}", "x", inputs=("s",)) for i in range(3)
        )
        assert total_footprint(WorkflowSpec("w", tasks, files)) == 15

    def test_unreferenced_files_ignored(self):
        spec = chain_spec(1, size=7)
        spec = replace(spec, files=spec.files + (FileSpec("orphan", 1000),))
        assert total_footprint(spec) == 14

    def test_reordering_invariant(self, fig_spec):
        rng = random.Random(3)
        tasks, files = list(fig_spec.tasks), list(fig_spec.files)
        rng.shuffle(tasks)
        rng.shuffle(files)
        shuffled = replace(fig_spec, tasks=tuple(tasks), files=tuple(files))
        assert total_footprint(shuffled) == total_footprint(fig_spec)


class TestSerialization:
    def test_round_trip_nine_tasks(self, fig_spec):
        assert parse(serialize(fig_spec)) == fig_spec

    def test_stable_bytes(self, fig_spec):
        assert serialize(fig_spec) == serialize(fig_spec)

    def test_field_names(self, fig_spec):
        data = json.loads(serialize(fig_spec))
        assert set(data) == {"name", "provenance", "files", "tasks"}
        assert set(data["provenance"]) == {"recipe", "requested_tasks", "requested_footprint_bytes", "seed"}
        assert set(data["files"][0]) == {"id", "size_bytes"}
        assert set(data["tasks"][0]) == {"id", "category", "cores", "cpuwork", "memwork", "f", "inputs", "outputs"}

    def test_missing_tasks_key(self, fig_spec):
        data = json.loads(serialize(fig_spec))
        del data["tasks"]
        with pytest.raises(SpecParseError, match="'tasks'"):
            parse(json.dumps(data))

    def test_unknown_field_rejected_with_path(self, fig_spec):
        data = json.loads(serialize(fig_spec))
        data["tasks"][3]["gpu"] = 1
        with pytest.raises(SpecParseError, match=r"tasks\[3\].*gpu"):
            parse(json.dumps(data))

    def test_malformed_text_has_location(self):
        with pytest.raises(SpecParseError, match="line 2 column"):
            parse('{"name": "x",\n "tasks": [,]}')

    def test_violations_after_parse(self):
        spec = WorkflowSpec("w", (TaskSpec("A", "x", inputs=("ghost",)),))
        from wfforge.wfspec import to_dict

        with pytest.raises(InvalidSpecError) as ei:
            parse(json.dumps(to_dict(spec)))
        assert any("ghost" in v for v in ei.value.violations)

    def test_serialize_requires_valid(self):
        with pytest.raises(InvalidSpecError):
            serialize(WorkflowSpec("w", (TaskSpec("A", "x", inputs=("ghost",)),)))


@st.composite
def random_specs(draw):
    """Random valid DAG specs: every task may read outputs of earlier tasks."""
    n = draw(st.integers(1, 12))
    files = [FileSpec(f"in{i}", draw(st.integers(0, 10**9))) for i in range(2)]
    tasks = []
    for i in range(n):
        out = FileSpec(f"o{i}", draw(st.integers(0, 10**9)))
        pool = ["in0", "in1"] + [f"o{j}" for j in range(i)]
        ins = draw(st.lists(st.sampled_from(pool), unique=True, max_size=3))
        params = TaskParams(
            cores=draw(st.integers(1, 4)),
            cpuwork=draw(st.sampled_from([0, 1.5, 100, 1234.25])),
            memwork=draw(st.integers(0, 10**6)),
            f=draw(st.integers(0, 10)) / 10,
        )
        tasks.append(TaskSpec(f"t{i}", draw(st.sampled_from(["a", "b"])), params, tuple(ins), (out.id,)))
        files.append(out)
    return WorkflowSpec("rand", tuple(tasks), tuple(files))


@settings(max_examples=60, deadline=None)
@given(random_specs())
def test_round_trip_property(spec):
    assert validate(spec).ok
    assert parse(serialize(spec)) == spec
