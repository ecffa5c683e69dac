"""Metrics computed from execution trace files."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .runner import ExecutionTrace


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous step function: value ``steps[i]`` from ``points[i]`` on.

    Tied samples share one point whose step includes all of them.
    """

    points: tuple[float, ...]
    counts: tuple[int, ...]  # cumulative sample count at each point
    n: int

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "Ecdf":
        if not samples:
            raise AnalysisError("no samples")
        points: list[float] = []
        counts: list[int] = []
        for i, x in enumerate(sorted(samples)):
            if points and points[-1] == x:
                counts[-1] = i + 1
            else:
                points.append(x)
                counts.append(i + 1)
        return cls(tuple(points), tuple(counts), len(samples))

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(c / self.n for c in self.counts)

    def exact(self, x: float) -> Fraction:
        i = bisect.bisect_right(self.points, x)
        return Fraction(0) if i == 0 else Fraction(self.counts[i - 1], self.n)

    def __call__(self, x: float) -> float:
        return float(self.exact(x))

    def to_text(self) -> str:
        return "".join(f"{x!r}\t{y!r}\n" for x, y in zip(self.points, self.steps))


def _completed(trace: ExecutionTrace) -> list:
    if not trace.tasks:
        raise AnalysisError("trace has no tasks")
    bad = [t.id for t in trace.tasks if t.status != "ok"]
    if bad:
        raise AnalysisError(f"trace has {len(bad)} unsuccessful task(s), e.g. {bad[0]}")
    return trace.tasks


def makespan(trace: ExecutionTrace) -> float:
    tasks = _completed(trace)
    return max(t.end for t in tasks) - min(t.start for t in tasks)


def throughput(trace: ExecutionTrace) -> float:
    span = makespan(trace)
    if span <= 0:
        raise AnalysisError("trace spans zero time")
    return len(trace.tasks) / span


def start_time_ecdf(trace: ExecutionTrace) -> Ecdf:
    started = trace.ran()
    if not started:
        raise AnalysisError("trace has no tasks that ran")
    return Ecdf.from_samples([t.start for t in started])


def ecdf_distance(a: Ecdf, b: Ecdf) -> float:
    """Largest vertical gap between two step functions.

    Both are constant between sample points, so checking every point of
    either one is exhaustive.
    """
    gap = max(abs(a.exact(x) - b.exact(x)) for x in set(a.points) | set(b.points))
    return float(gap)


def makespan_ratio(trace_a: ExecutionTrace, trace_b: ExecutionTrace) -> float:
    """makespan(b) / makespan(a): above 1 means ``a`` finished faster."""
    ma, mb = makespan(trace_a), makespan(trace_b)
    if ma <= 0 or mb <= 0:
        raise AnalysisError("zero-duration trace")
    return mb / ma
