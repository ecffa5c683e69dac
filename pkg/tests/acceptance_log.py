"""Collects one pass/fail line per acceptance criterion for the run summary."""

from contextlib import contextmanager

RESULTS: list[str] = []


@contextmanager
def criterion(number: int, title: str):
    try:
        yield
    except BaseException as exc:
        line = f"criterion {number:2d} FAIL  {title}  ({type(exc).__name__})"
        RESULTS.append(line)
        print(line)
        raise
    line = f"criterion {number:2d} PASS  {title}"
    RESULTS.append(line)
    print(line)
