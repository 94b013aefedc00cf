"""Outer planning loop: relinearize barriers, solve the reduced LQ problem, line search."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..barriers import DEFAULT_ANCHOR, JointLimitBarrier, barrier_values, linearize_arrays
from ..errors import DimensionError, DivergenceError
from .kernels import solve_horizon
from .problem import ProblemSpec, expand_cost

STEP_SCALES = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125)


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-4  # on max |du|, rad/s
    max_iterations: int = 20
    max_rejections: int = 5  # consecutive failed line searches before giving up
    barrier_weight: float = 1.0  # weight of barrier magnitudes in the merit
    anchor: float = DEFAULT_ANCHOR
    # keeps points resting on the band edge constrained, so they do not chatter in and out
    activation_margin: float = 1e-6


@dataclass
class PlanResult:
    u_final: np.ndarray  # (N, m)
    x_predicted: np.ndarray  # (N + 1, n)
    feedback_gains: np.ndarray  # (N, m, n), total gain on the state displacement
    iterations: int
    converged: bool
    residuals: List[float] = field(default_factory=list)
    iteration_times: List[float] = field(default_factory=list)
    merits: List[float] = field(default_factory=list)
    dt: float = 0.001

    @property
    def horizon(self) -> int:
        return self.u_final.shape[0]

    def to_csv(self) -> str:
        return trajectory_csv(self.x_predicted, self.u_final, self.dt)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": [float(r) for r in self.residuals],
            "iteration_times_s": [float(t) for t in self.iteration_times],
            "merits": [float(m) for m in self.merits],
            "horizon": self.horizon,
            "dt": self.dt,
        }


def trajectory_csv(x, u, dt) -> str:
    """``step, t, x0.., u0..`` with one row per state; the last row commands zero velocity."""
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    n, m = x.shape[1], u.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "t"] + [f"x{j}" for j in range(n)] + [f"u{j}" for j in range(m)])
    for i in range(x.shape[0]):
        ui = u[i] if i < u.shape[0] else np.zeros(m)
        w.writerow([i, repr(i * dt)] + [repr(float(v)) for v in x[i]] + [repr(float(v)) for v in ui])
    return buf.getvalue()


def read_trajectory_csv(text: str):
    """Inverse of :func:`trajectory_csv`; returns ``(t, x, u)`` with ``u`` one row shorter than ``x``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(h.startswith("x") for h in header)
    return body[:, 1], body[:, 2:2 + n], body[:-1, 2 + n:]


def rollout(A, B, x0, u) -> np.ndarray:
    """States of ``x[i+1] = A x[i] + B u[i]`` for constant ``A, B``."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    u = np.asarray(u, float)
    x0 = np.asarray(x0, float)
    if np.array_equal(A, np.eye(A.shape[0])):
        steps = u @ B.T
        return np.vstack([x0, x0 + np.cumsum(steps, axis=0)])
    x = np.empty((u.shape[0] + 1, x0.shape[0]))
    x[0] = x0
    for i in range(u.shape[0]):
        x[i + 1] = A @ x[i] + B @ u[i]
    return x


def _integrator_gain(A, B) -> float:
    """``beta`` when ``A = I`` and ``B = beta I`` (velocity-integrator joints), else 0."""
    n, m = B.shape
    if n != m or not np.array_equal(A, np.eye(n)):
        return 0.0
    beta = float(B[0, 0])
    return beta if beta > 0 and np.array_equal(B, beta * np.eye(n)) else 0.0


def _merit(spec, barriers, weight, x, u):
    value = spec.total_cost(x, u)
    if barriers:
        value += weight * float(barrier_values(barriers, x).sum())
    return value


def _nominal(initial):
    if hasattr(initial, "x_des"):
        return np.array(initial.x_des, float), np.array(initial.u_des, float)
    x, u = initial
    return np.array(x, float), np.array(u, float)


def iterate_plan(model, spec: ProblemSpec, initial, barriers: Sequence[JointLimitBarrier] = (),
                 options: Optional[SolverOptions] = None) -> PlanResult:
    """Refine ``initial`` into a plan that minimizes ``spec`` under the barrier constraints.

    Each outer iteration relinearizes the barriers about the current nominal,
    solves the reduced LQ problem for ``(du, dx)`` and takes the longest step
    among :data:`STEP_SCALES` that does not increase the merit (tracking cost
    plus weighted barrier magnitudes). Stops when the full step satisfies
    ``max |du| <= tolerance``. Final inputs are clamped to the velocity limits
    and ``x_predicted`` is their rollout through the model.
    """
    opts = options or SolverOptions()
    barriers = list(barriers)
    A = np.asarray(model.A, float)
    B = np.asarray(model.B, float)
    x, u = _nominal(initial)
    N, n, m = spec.horizon, spec.n, spec.m
    if u.shape != (N, m) or x.shape != (N + 1, n):
        raise DimensionError(f"initial path covers {u.shape[0]} steps, problem horizon is {N}")
    x = rollout(A, B, spec.x0, u)  # keep the nominal dynamically consistent

    beta = _integrator_gain(A, B)
    A_seq = np.broadcast_to(A, (N, n, n))
    B_seq = np.broadcast_to(B, (N, n, m))
    residuals, times, merits = [], [], []
    merit = _merit(spec, barriers, opts.barrier_weight, x, u)
    merits.append(merit)
    iterations = 0
    rejections = 0
    converged = False
    gains = np.zeros((N, m, n))
    while True:
        t0 = time.perf_counter()
        if barriers:
            rows, rhs, n_min, n_max = linearize_arrays(barriers, x, opts.anchor, opts.activation_margin)
            counts = n_min + n_max
        else:
            rows, rhs, counts = np.zeros((N + 1, 1, n)), np.zeros((N + 1, 1)), np.zeros(N + 1, np.int64)
        c = expand_cost(spec, (x, u), A, B)
        du, dx, gains, status = solve_horizon(A_seq, B_seq, c.q, c.r, c.Q, c.R, c.P, np.asarray(c.qN, float),
                                              np.asarray(c.QN, float), rows, rhs, counts, beta)
        if status >= 0:
            raise DivergenceError(f"Riccati recursion produced non-finite values at step {status}", step=int(status))
        residual = float(np.abs(du).max())
        residuals.append(residual)
        if residual <= opts.tolerance:
            converged = True
            times.append(time.perf_counter() - t0)
            break
        if iterations >= opts.max_iterations:
            times.append(time.perf_counter() - t0)
            break
        accepted = False
        for scale in STEP_SCALES:
            x_try = x + scale * dx
            u_try = u + scale * du
            trial = _merit(spec, barriers, opts.barrier_weight, x_try, u_try)
            if np.isfinite(trial) and trial <= merit:
                x, u, merit = x_try, u_try, trial
                accepted = True
                break
        times.append(time.perf_counter() - t0)
        if accepted:
            iterations += 1
            rejections = 0
            merits.append(merit)
        else:
            rejections += 1
            if rejections >= opts.max_rejections:
                raise DivergenceError(f"no cost-decreasing step for {rejections} consecutive iterations")

    u_final = np.clip(u, -model.velocity_limit, model.velocity_limit)
    x_pred = rollout(A, B, spec.x0, u_final)
    return PlanResult(u_final=u_final, x_predicted=x_pred, feedback_gains=np.asarray(gains),
                      iterations=iterations, converged=converged, residuals=residuals,
                      iteration_times=times, merits=merits, dt=spec.dt)


def lqr_initial_path(model, x0, x_goal, horizon_N: int, state_rate=1.0, input_rate=1.0, terminal=1.0,
                     saturate=True):
    """Finite-horizon LQR regulation of the linear model toward ``x_goal``.

    Weights are per second (``Q = dt * state_rate * I`` and likewise for the
    input); returns ``(x (N + 1, n), u (N, m))``.
    """
    A = np.asarray(model.A, float)
    B = np.asarray(model.B, float)
    n, m = B.shape
    dt = model.dt
    Q = dt * state_rate * np.eye(n)
    R = dt * input_rate * np.eye(m)
    S = terminal * np.eye(n)
    K = np.empty((horizon_N, m, n))
    for i in range(horizon_N - 1, -1, -1):
        K[i] = np.linalg.solve(R + B.T @ S @ B, B.T @ S @ A)
        S = Q + A.T @ S @ (A - B @ K[i])
        S = 0.5 * (S + S.T)
    x = np.empty((horizon_N + 1, n))
    u = np.empty((horizon_N, m))
    x[0] = x0
    limit = model.velocity_limit if saturate else np.inf
    goal = np.asarray(x_goal, float)
    # regulate the error e = x - goal; A = I keeps the goal an equilibrium
    for i in range(horizon_N):
        u[i] = np.clip(-K[i] @ (x[i] - goal), -limit, limit)
        x[i + 1] = A @ x[i] + B @ u[i]
    return x, u
