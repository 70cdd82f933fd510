"""Benchmark suite for safe learning-based control."""

__version__ = "0.1.0"
