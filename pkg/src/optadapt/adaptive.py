"""Adaptive low-level control law and the initial path estimate it produces.

The control law is a single-gain nonlinear feedback on the joint error::

    tau = gamma * Lambda(e) + eta
    Lambda(e) = e**3 + e * ((e - e_prev) / dt)**2 + e * (sum_j e_j dt)**2

Rolling it through the estimated linear model gives the desired path that
seeds the optimizer.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .chain import ChainModel, gravity_term
from .errors import DimensionError, DivergenceError, NumericError

DIVERGENCE_BOUND = 1e3  # rad


@dataclass(frozen=True)
class AdaptiveState:
    """Gain and error memory of the adaptive law.

    ``error_integral`` is clamped elementwise to ``+-integral_limit`` (rad s)
    to stop windup from the squared integral term.
    """

    gamma: np.ndarray
    dt: float
    error_prev: np.ndarray
    error_integral: np.ndarray
    integral_limit: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.gamma)):
            raise NumericError("adaptive gain must be finite")

    @classmethod
    def start(cls, gamma, dt, error0, integral_limit=10.0):
        """Fresh state whose derivative term is zero on the first evaluation."""
        error0 = np.asarray(error0, dtype=float)
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), error0.shape).copy()
        return cls(gamma, dt, error0.copy(), np.zeros_like(error0), integral_limit)


def lambda_fn(state: AdaptiveState, error):
    """Evaluate the nonlinear error function; returns ``(Lambda, next_state)``.

    The running integral includes the current error before it is squared.
    """
    e = np.asarray(error, dtype=float)
    if e.shape != np.shape(state.error_prev):
        raise DimensionError(f"error has shape {e.shape}, state expects {np.shape(state.error_prev)}")
    if not np.all(np.isfinite(e)):
        raise NumericError("non-finite joint error")
    integral = np.clip(state.error_integral + e * state.dt, -state.integral_limit, state.integral_limit)
    rate = (e - state.error_prev) / state.dt
    lam = e ** 3 + e * rate ** 2 + e * integral ** 2
    return lam, replace(state, error_prev=e, error_integral=integral)


def adaptive_torque(state: AdaptiveState, x, x_goal, gravity):
    """``tau = gamma * Lambda(x_goal - x) + gravity``; returns ``(tau, next_state)``."""
    x = np.asarray(x, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    gravity = np.asarray(gravity, dtype=float)
    if not (x.shape == x_goal.shape == gravity.shape == np.shape(state.gamma)):
        raise DimensionError("x, x_goal, gravity and gamma must share one length")
    lam, nxt = lambda_fn(state, x_goal - x)
    return state.gamma * lam + gravity, nxt


@dataclass(frozen=True)
class InitialPath:
    x_des: np.ndarray  # (N + 1, n)
    u_des: np.ndarray  # (N, m)
    tau: np.ndarray  # (N, n)
    dt: float

    @property
    def horizon(self) -> int:
        return self.u_des.shape[0]

    def to_csv(self) -> str:
        return _path_csv(self)


def estimate_path(model: ChainModel, x0, x_goal, horizon_N: int, gamma=None, dt=None, *,
                  gravity_load=True, saturate=True, integral_limit=10.0) -> InitialPath:
    """Roll the adaptive law through the estimated model ``(A, B)``.

    With ``gravity_load`` the estimated model carries the gravity load that
    the ``eta`` term of the law compensates, so ``x[i+1] = A x[i] + B (tau[i] - eta[i])``.
    With ``saturate`` the feedback part of ``tau`` is clipped to the joint
    velocity limits (``B`` absorbs the torque-to-velocity map).
    """
    if horizon_N < 1:
        raise ValueError("horizon_N must be at least 1")
    n = model.n_joints
    x0 = model.check_q(x0).astype(float)
    x_goal = model.check_q(x_goal).astype(float)
    if gamma is None:
        if model.adaptive_gain is None:
            raise ValueError("model has no adaptive_gain; pass gamma explicitly")
        gamma = model.adaptive_gain
    dt = model.dt if dt is None else float(dt)
    state = AdaptiveState.start(gamma, dt, x_goal - x0, integral_limit)
    limit = model.velocity_limit if saturate else np.full(n, np.inf)
    A, B = model.A, model.B
    loaded = gravity_load or not np.any(model.masses)

    x = np.empty((horizon_N + 1, n))
    fb = np.empty((horizon_N, n))
    eta = np.zeros((horizon_N, n))
    x[0] = x0
    for i in range(horizon_N):
        lam, state = lambda_fn(state, x_goal - x[i])
        fb[i] = np.clip(state.gamma * lam, -limit, limit)
        if loaded:
            x[i + 1] = A @ x[i] + B @ fb[i]
        else:
            eta[i] = gravity_term(model, x[i])
            x[i + 1] = A @ x[i] + B @ (fb[i] + eta[i])
        if not np.all(np.abs(x[i + 1]) <= DIVERGENCE_BOUND):
            raise DivergenceError("initial path estimate diverged; reduce the adaptive gain", step=i + 1)
    if loaded and np.any(model.masses):
        eta = gravity_term(model, x[:-1])
    if model.output_matrix is None:
        u = np.diff(x, axis=0) / dt
    else:
        u = x[:-1] @ model.output_matrix.T
    return InitialPath(x_des=x, u_des=u, tau=fb + eta, dt=dt)


def _path_csv(path: InitialPath) -> str:
    n = path.x_des.shape[1]
    m = path.u_des.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "t"] + [f"x_des{j}" for j in range(n)] + [f"u_des{j}" for j in range(m)]
               + [f"tau{j}" for j in range(n)])
    for i in range(path.horizon):
        w.writerow([i, repr(i * path.dt)] + [repr(float(v)) for v in path.x_des[i]]
                   + [repr(float(v)) for v in path.u_des[i]] + [repr(float(v)) for v in path.tau[i]])
    return buf.getvalue()


def read_initial_path_csv(text: str, dt: float, x_final=None) -> InitialPath:
    """Parse the CSV written by :meth:`InitialPath.to_csv`.

    The CSV holds ``N`` rows; the terminal state is rebuilt from the last
    row unless ``x_final`` is given.
    """
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(h.startswith("x_des") for h in header)
    m = sum(h.startswith("u_des") for h in header)
    x = body[:, 2:2 + n]
    u = body[:, 2 + n:2 + n + m]
    tau = body[:, 2 + n + m:]
    last = x[-1] + dt * u[-1] if x_final is None else np.asarray(x_final, float)
    return InitialPath(np.vstack([x, last]), u, tau, dt)
