"""Mismatched-plant execution, metrics, scenario files and the benchmark harness."""
