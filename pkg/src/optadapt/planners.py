"""The three model-based planning pipelines and a uniform motion record for execution."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adaptive import estimate_path
from .barriers import DEFAULT_CAP, DEFAULT_ETA, DEFAULT_RHO0, JointLimitBarrier, default_barriers
from .lq.problem import ProblemSpec
from .lq.solver import PlanResult, SolverOptions, iterate_plan, lqr_initial_path


@dataclass(frozen=True)
class PlannerSettings:
    horizon: int = 5000
    state_rate: float = 0.1  # pull toward the joint goal, per second
    input_rate: float = 1.0
    terminal: float = 1e4  # terminal pull toward the joint goal
    rho0: float = DEFAULT_RHO0
    eta: float = DEFAULT_ETA
    cap: float = DEFAULT_CAP
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class Motion:
    """Planned joint motion ready to execute.

    ``x`` are the positions the plan expects, ``u`` the velocity commands.
    ``gains`` (if any) map the measured deviation ``x_meas - x`` to a velocity
    correction; ``adaptive_gain`` (if any) enables the adaptive correction.
    """

    method: str
    x: np.ndarray  # (T + 1, n)
    u: np.ndarray  # (T, n)
    dt: float
    planning_time: float
    success: bool = True
    gains: Optional[np.ndarray] = None
    adaptive_gain: Optional[np.ndarray] = None
    result: Optional[PlanResult] = None
    message: str = ""


def plan_barriers(joint_min, joint_max, settings: PlannerSettings) -> list:
    return default_barriers(joint_min, joint_max, settings.rho0, settings.eta, settings.cap)


def _refine(model, q_start, q_goal, x_seed, u_seed, barriers, settings):
    spec = ProblemSpec(
        x0=q_start, goal=q_goal, horizon=settings.horizon, dt=model.dt,
        state_weight=model.dt * settings.state_rate * np.eye(model.n_joints),
        input_weight=model.dt * settings.input_rate * np.eye(model.n_joints),
        terminal_weight=settings.terminal * np.eye(model.n_joints),
    )
    return iterate_plan(model, spec, (x_seed, u_seed), barriers, settings.solver)


def plan_optimal_adapt(model, q_start, q_goal, barriers: Sequence[JointLimitBarrier],
                       settings: PlannerSettings = PlannerSettings(), clock=time.perf_counter) -> Motion:
    """Adaptive path estimate refined by the constrained LQ optimizer."""
    t0 = clock()
    path = estimate_path(model, q_start, q_goal, settings.horizon)
    result = _refine(model, q_start, q_goal, path.x_des, path.u_des, barriers, settings)
    return Motion("optimal-adapt", result.x_predicted, result.u_final, model.dt, clock() - t0,
                  gains=result.feedback_gains, adaptive_gain=model.adaptive_gain, result=result)


def plan_adapt_only(model, q_start, q_goal, settings: PlannerSettings = PlannerSettings(),
                    clock=time.perf_counter) -> Motion:
    """The adaptive path estimate alone, executed with the adaptive correction only."""
    t0 = clock()
    path = estimate_path(model, q_start, q_goal, settings.horizon)
    return Motion("adapt", path.x_des, path.u_des, model.dt, clock() - t0,
                  adaptive_gain=model.adaptive_gain)


def plan_optimal_lqr(model, q_start, q_goal, barriers: Sequence[JointLimitBarrier],
                     settings: PlannerSettings = PlannerSettings(), clock=time.perf_counter) -> Motion:
    """Velocity-LQR rollout refined by the same optimizer; LQ feedback only during execution."""
    t0 = clock()
    x_seed, u_seed = lqr_initial_path(model, q_start, q_goal, settings.horizon)
    result = _refine(model, q_start, q_goal, x_seed, u_seed, barriers, settings)
    return Motion("optimal-lqr", result.x_predicted, result.u_final, model.dt, clock() - t0,
                  gains=result.feedback_gains, result=result)
