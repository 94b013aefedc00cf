"""Optimal-adaptive trajectory planning for redundant serial manipulators."""

__version__ = "0.1.0"
