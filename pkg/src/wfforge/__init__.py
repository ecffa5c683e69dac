"""Synthetic scientific-workflow benchmarks: generation, execution and makespan models."""

__version__ = "0.1.0"
