"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line."""

import math
import random
import statistics
import time
from dataclasses import replace
from fractions import Fraction

import pytest

from acceptance_log import criterion
from oracles import brute_per_level, exact_macro, random_level_spec
from wfforge import wfspec
from wfforge.analyze import makespan, start_time_ecdf, throughput
from wfforge.calibrate import CalibrationError, CalibrationTarget, ProfileCounts, f_from_profile, fit_work
from wfforge.models import (
    PlatformModel,
    WorkloadAggregate,
    aggregate,
    macro_no_overlap,
    macro_overlap,
    nodes_for_tasks,
    per_level,
    task_costs,
)
from wfforge.recipes import GenerationRequest, available_recipes, distribute_footprint, generate, load_recipe
from wfforge.runner import dependency_violations, execute_local, peak_cores, verify_outputs
from wfforge.taskbench import compute_phase, read_phase, run_task, write_phase
from wfforge.taskbench.kernels import TERMS_PER_UNIT
from wfforge.wfspec import TaskParams

MB = 10**6
W_T, BW_READ, BW_WRITE = 20.62, 466 * MB, 60 * MB
TENTHS = [i / 10 for i in range(11)]


def test_c01_macro_formulas():
    with criterion(1, "macro-task formulas match exact rational evaluation within 1e-9"):
        rng = random.Random(101)
        t0 = time.perf_counter()
        for _ in range(50):
            n_tasks = rng.randint(1, 200_000)
            agg = WorkloadAggregate(rng.uniform(0, 1e13), rng.uniform(0, 1e12), n_tasks * W_T)
            n, p = rng.randint(1, 500), rng.choice([1, 4, 40, 42])
            plat = PlatformModel(n, p, BW_READ, BW_WRITE)
            no, ov = exact_macro(agg.data_read, agg.data_write, agg.work, n, p, BW_READ, BW_WRITE)
            assert abs(Fraction(macro_no_overlap(agg, plat)) - no) <= Fraction(1, 10**9) * no
            assert abs(Fraction(macro_overlap(agg, plat)) - ov) <= Fraction(1, 10**9) * ov
        assert time.perf_counter() - t0 < 1.0


def test_c02_node_sizing():
    with criterion(2, "nodes_for_tasks(10,000)=25 and (100,000)=250"):
        assert nodes_for_tasks(10_000) == 25
        assert nodes_for_tasks(100_000) == 250


def test_c03_profile_rounding():
    with criterion(3, "profile rounding reproduces the seven published f values"):
        table = [(0.45, 0.5), (0.38, 0.4), (0.54, 0.5), (0.55, 0.6), (0.57, 0.6), (0.62, 0.6), (0.53, 0.5)]
        for raw, expected in table:
            total = 10_000
            memory = total - round(raw * total)
            assert f_from_profile(ProfileCounts(total, memory)) == expected


def _linear(k_cpu, k_mem, noise, rng):
    def run(cpuwork, memwork, f):
        j = lambda: 1 + rng.uniform(-noise, noise) if noise else 1.0  # noqa: E731
        return (k_cpu * cpuwork * j() if f > 0 else None, k_mem * memwork * j() if f < 1 else None)

    return run


def test_c04_calibration_convergence():
    with criterion(4, "fit_work: noiseless <= 3 rounds (100/100), 10% noise >= 95/100 within 20"):
        t0 = time.perf_counter()
        for seed in range(100):
            rng = random.Random(seed)
            target = CalibrationTarget(rng.uniform(0.1, 120), rng.choice(TENTHS))
            res = fit_work(target, _linear(rng.uniform(1e-4, 2), rng.uniform(1e-7, 1e-2), 0.0, rng))
            assert res.iterations <= 3
        converged = 0
        for seed in range(100):
            rng = random.Random(10_000 + seed)
            target = CalibrationTarget(rng.uniform(0.1, 120), rng.choice(TENTHS), max_iterations=20)
            try:
                fit_work(target, _linear(rng.uniform(1e-4, 2), rng.uniform(1e-7, 1e-2), 0.10, rng))
                converged += 1
            except CalibrationError:
                pass
        print(f"  noisy convergence: {converged}/100")
        assert converged >= 95
        assert time.perf_counter() - t0 < 10


def test_c05_work_conservation(tmp_path):
    with criterion(5, "kernel conserves cpuwork, memwork, worker split and output sizes (50 settings)"):
        rng = random.Random(5)
        t0 = time.perf_counter()
        for i in range(50):
            n = rng.randint(1, 4)
            f = rng.choice(TENTHS)
            cpuwork = rng.randint(0, 200_000) / 1000  # whole series terms
            memwork = rng.randint(0, 300_000)
            outputs = [(tmp_path / f"o{i}_{k}", rng.randint(0, 3 * MB)) for k in range(rng.randint(0, 2))]
            rep = run_task(TaskParams(n, cpuwork, memwork, f), outputs=outputs, seed=i,
                           array_bytes=1 << 20, oversubscribe=True)
            cpu = [w for w in rep.workers if w.kind == "cpu"]
            mem = [w for w in rep.workers if w.kind == "mem"]
            assert len(rep.workers) == 10 * n
            assert len(cpu) == n * round(10 * f) and len(mem) == n * (10 - round(10 * f))
            for g in range(n):
                assert sum(w.kind == "cpu" for w in rep.workers if w.group == g) == round(10 * f)
            if cpu:
                assert sum(w.iterations for w in cpu) == round(cpuwork * TERMS_PER_UNIT)
                assert math.fsum(w.units for w in cpu) == pytest.approx(cpuwork, abs=1e-9)
            if mem:
                assert sum(w.checksum for w in mem) == memwork
                assert sum(w.iterations for w in mem) == memwork
            for path, size in outputs:
                assert path.stat().st_size == size
            assert rep.bytes_written == sum(s for _, s in outputs)
        assert time.perf_counter() - t0 < 120


def test_c06_kernel_monotonicity():
    with criterion(6, "t_cpu strictly increasing over 1e3/1e4/1e5 units; pi error shrinks"):
        medians, errors = [], []
        for cw in (1e3, 1e4, 1e5):
            runs = [compute_phase(TaskParams(1, cw, 0, 1.0), array_bytes=1 << 20) for _ in range(5)]
            medians.append(statistics.median(r.t_cpu for r in runs))
            errors.append(abs(runs[0].pi_estimate - math.pi))
        print(f"  median t_cpu: {medians}")
        assert medians[0] < medians[1] < medians[2]
        assert errors[2] < errors[0]


def test_c07_per_level_oracle():
    with criterion(7, "per_level equals brute-force batch evaluation on 200 random specs"):
        t0 = time.perf_counter()
        for seed in range(200):
            rng = random.Random(70_000 + seed)
            spec, costs, _ = random_level_spec(rng, max_tasks=50, max_levels=3)
            n, p = rng.randint(1, 4), rng.randint(1, 12)
            plat = PlatformModel(n, p, BW_READ, BW_WRITE)
            assert per_level(spec, plat, costs) == brute_per_level(spec, n, p, BW_READ, BW_WRITE, costs)
        assert time.perf_counter() - t0 < 30


def test_c08_generation_fidelity():
    with criterion(8, "shipped recipes: valid, deterministic, size gap bound, exact footprint"):
        t0 = time.perf_counter()
        footprint = 10**9 + 7
        for name in available_recipes():
            recipe = load_recipe(name)
            for size in (recipe.min_tasks, 100, 500, 1000):
                req = GenerationRequest(recipe, size, footprint, seed=8)
                spec = generate(req)
                assert wfspec.validate(spec).ok
                assert wfspec.serialize(spec) == wfspec.serialize(generate(req))
                gap = abs(len(spec.tasks) - size)
                assert gap == 0 or gap < recipe.largest_pattern
                assert wfspec.total_footprint(spec) == footprint
                assert wfspec.total_footprint(distribute_footprint(spec, 3 * footprint)) == 3 * footprint
        assert time.perf_counter() - t0 < 30


# --- criteria 9 and 10 share one desk-scale execution ----------------------------

DESK_PARAMS = TaskParams(1, 50_000, 1_000_000, 0.5)
DESK_ARRAY = 4 << 20
CORE_CAP = 4


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    spec = generate(GenerationRequest(load_recipe("blast"), 100, 100 * MB, DESK_PARAMS, seed=9))
    workdir = tmp_path_factory.mktemp("desk")
    t0 = time.perf_counter()
    trace = execute_local(spec, CORE_CAP, workdir, seed=9, array_bytes=DESK_ARRAY)
    return spec, trace, workdir, time.perf_counter() - t0


@pytest.mark.slow
def test_c09_end_to_end(desk_run):
    spec, trace, workdir, wall = desk_run
    with criterion(9, "100-task fan-out-fan-in run at core cap 4: safe, conserved, verified, ECDF, throughput"):
        print(f"  wall time {wall:.1f}s, makespan {makespan(trace):.2f}s")
        assert len(spec.tasks) == 100 and trace.ok
        assert wfspec.total_footprint(spec) == 100 * MB
        assert dependency_violations(trace, spec) == []
        assert peak_cores(trace) <= CORE_CAP
        check = verify_outputs(spec, workdir)
        assert check.mismatches == []
        ecdf = start_time_ecdf(trace)
        assert all(a < b for a, b in zip(ecdf.points, ecdf.points[1:]))
        assert all(a <= b for a, b in zip(ecdf.steps, ecdf.steps[1:]))
        assert ecdf.steps[-1] == 1.0 and ecdf.counts[-1] == 100
        assert throughput(trace) * makespan(trace) == pytest.approx(100, rel=1e-12)
        assert wall < 300


def _measure_bandwidth(tmp_path, nbytes=32 * MB):
    path = tmp_path / "bw.bin"
    t0 = time.perf_counter()
    write_phase(path, nbytes, seed=1)
    t1 = time.perf_counter()
    read_phase(path)
    t2 = time.perf_counter()
    path.unlink()
    return nbytes / (t2 - t1), nbytes / (t1 - t0)


@pytest.mark.slow
def test_c10_model_vs_execution(desk_run, tmp_path):
    spec, trace, _, _ = desk_run
    with criterion(10, "per_level + measured overhead within 2x of measured makespan; overlap <= no-overlap"):
        solo = [compute_phase(DESK_PARAMS, array_bytes=DESK_ARRAY) for _ in range(3)]
        w_t = statistics.median(r.ended - r.started for r in solo)
        bw_read, bw_write = _measure_bandwidth(tmp_path)
        from wfforge.taskbench import usable_cores

        plat = PlatformModel(1, min(CORE_CAP, len(usable_cores())), bw_read, bw_write)
        costs = task_costs(spec, w_t)

        empty = replace(
            spec,
            tasks=tuple(replace(t, params=TaskParams(1, 0, 0, 1.0)) for t in spec.tasks),
            files=tuple(replace(f, size_bytes=0) for f in spec.files),
        )
        overhead = makespan(execute_local(empty, CORE_CAP, tmp_path / "empty", allow_empty=True))

        predicted = per_level(spec, plat, costs) + overhead
        measured = makespan(trace)
        agg = aggregate(costs)
        print(f"  w_t={w_t:.3f}s p={plat.p} overhead={overhead:.2f}s predicted={predicted:.2f}s "
              f"measured={measured:.2f}s ratio={predicted / measured:.3f}")
        assert 0.5 <= predicted / measured <= 2.0
        assert macro_overlap(agg, plat) <= macro_no_overlap(agg, plat)
