"""End-effector error, success and limit-violation metrics of an execution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RMSE_WINDOW = 0.5  # s, trailing steady-state window
SUCCESS_RMSE = 0.25  # m
VIOLATION_TOL = 1e-3  # rad


@dataclass(frozen=True)
class Metrics:
    ee_rmse: float
    success: bool
    total_time: float
    violation_count: int
    max_violation: float
    terminal_joint_error: float = float("nan")


def limit_excess(q, joint_min, joint_max) -> np.ndarray:
    """Per sample and joint, how far ``q`` lies outside ``[joint_min, joint_max]`` (0 inside)."""
    q = np.asarray(q, float)
    return np.maximum(np.maximum(joint_min - q, q - joint_max), 0.0)


def compute_metrics(log, goal_position, joint_min, joint_max, q_goal=None,
                    window=RMSE_WINDOW, threshold=SUCCESS_RMSE, tol=VIOLATION_TOL) -> Metrics:
    """RMSE of ``|ee - goal|`` over the trailing ``window`` seconds and limit violations over the run.

    A violation is a (sample, joint) pair more than ``tol`` outside the limits.
    Non-finite executions count as failures with infinite error.
    """
    ee = np.asarray(log.ee, float)
    samples = max(1, min(ee.shape[0], int(round(window / log.dt))))
    err = np.linalg.norm(ee[-samples:] - np.asarray(goal_position, float), axis=1)
    rmse = float(np.sqrt(np.mean(err ** 2)))
    q = np.asarray(log.q, float)
    finite = bool(np.all(np.isfinite(q)) and np.all(np.isfinite(ee)))
    if not finite:
        rmse = float("inf")
    excess = limit_excess(q[np.all(np.isfinite(q), axis=1)], joint_min, joint_max)
    count = int(np.count_nonzero(excess > tol))
    worst = float(excess.max(initial=0.0))
    terminal = float("nan") if q_goal is None else float(np.abs(q[-1] - q_goal).max())
    return Metrics(
        ee_rmse=rmse,
        success=finite and rmse <= threshold and count == 0,
        total_time=float(log.planning_time + log.execution_time),
        violation_count=count,
        max_violation=worst,
        terminal_joint_error=terminal,
    )
