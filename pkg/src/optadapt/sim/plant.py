"""Velocity-level "true plant" that differs from the planning model.

Per step, with commanded velocity ``u`` (after ``actuation_delay`` steps)::

    v[k]   = clip(u, -v_max, v_max) - friction * v[k-1]
    q[k+1] = q[k] + dt * v[k] + dt * w[k],   w ~ U(-amp, amp)

so a constant command settles at ``u / (1 + friction)``.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..adaptive import AdaptiveState, lambda_fn
from ..chain import ChainModel, ee_positions
from ..errors import ValidationError

SETTLE_TIME = 0.5  # s of goal hold appended after every plan


@dataclass(frozen=True)
class PlantModel:
    model: ChainModel
    viscous_friction: float = 0.1
    input_disturbance: float = 0.01  # rad/s
    actuation_delay: int = 0  # steps
    saturate: bool = True

    def __post_init__(self):
        if self.viscous_friction < 0:
            raise ValidationError("viscous_friction must be non-negative")
        if self.input_disturbance < 0:
            raise ValidationError("input_disturbance must be non-negative")
        if self.actuation_delay < 0:
            raise ValidationError("actuation_delay must be non-negative")

    @classmethod
    def ideal(cls, model):
        return cls(model, 0.0, 0.0, 0, True)


@dataclass
class ExecutionLog:
    q: np.ndarray  # (T + 1, n) measured joints
    u: np.ndarray  # (T, n) commanded velocities
    ee: np.ndarray  # (T + 1, 3) end-effector positions
    dt: float
    planning_time: float
    execution_time: float  # wall-clock seconds spent simulating
    mode: str
    method: str = ""

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.q.shape[0]) * self.dt

    def to_csv(self) -> str:
        """``step, t, q0.., u0.., ee_x, ee_y, ee_z``; the last row commands zero velocity."""
        n = self.q.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t"] + [f"q{j}" for j in range(n)] + [f"u{j}" for j in range(n)] + ["ee_x", "ee_y", "ee_z"])
        for i in range(self.q.shape[0]):
            ui = self.u[i] if i < self.u.shape[0] else np.zeros(n)
            w.writerow([i, repr(i * self.dt)] + [repr(float(v)) for v in np.concatenate([self.q[i], ui, self.ee[i]])])
        return buf.getvalue()


def read_execution_csv(text: str):
    """Inverse of :meth:`ExecutionLog.to_csv`; returns ``(t, q, u, ee)``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(h.startswith("q") for h in header)
    return body[:, 1], body[:, 2:2 + n], body[:-1, 2 + n:2 + 2 * n], body[:, 2 + 2 * n:]

    @property
    def duration(self) -> float:
        return self.u.shape[0] * self.dt


def _reference(plan):
    """``(x_ref, u_ref, gains, gamma, planning_time, method)`` from a Motion, PlanResult or Trajectory."""
    if hasattr(plan, "x_predicted"):  # PlanResult
        return plan.x_predicted, plan.u_final, plan.feedback_gains, None, 0.0, "plan"
    if hasattr(plan, "velocities"):  # sampling Trajectory
        return plan.q, plan.velocities, None, None, plan.planning_time, "trajectory"
    return plan.x, plan.u, plan.gains, plan.adaptive_gain, plan.planning_time, plan.method


def simulate(plant: PlantModel, plan, mode: str = "closed", seed: Optional[int] = 0,
             settle_time: float = SETTLE_TIME, clock=time.perf_counter) -> ExecutionLog:
    """Execute ``plan`` on ``plant`` followed by ``settle_time`` seconds holding the final reference.

    ``mode="open"`` replays the velocity commands. ``mode="closed"`` adds the
    plan's feedback ``L_k (x_meas - x_ref)`` and, when the plan carries an
    adaptive gain, ``gamma * Lambda(x_ref - x_meas)``. The settle hold reuses the
    last feedback gain.
    """
    if mode not in ("open", "closed"):
        raise ValueError("mode must be 'open' or 'closed'")
    x_ref, u_ref, gains, gamma, planning_time, method = _reference(plan)
    x_ref = np.asarray(x_ref, float)
    u_ref = np.asarray(u_ref, float)
    model = plant.model
    n = model.n_joints
    dt = model.dt
    hold = int(round(settle_time / dt))
    steps = u_ref.shape[0] + hold
    x_ref = np.vstack([x_ref, np.repeat(x_ref[-1:], hold, axis=0)])
    u_ref = np.vstack([u_ref, np.zeros((hold, n))])
    limit = model.velocity_limit if plant.saturate else np.full(n, np.inf)
    rng = np.random.default_rng(seed)
    amp = plant.input_disturbance
    noise = rng.uniform(-amp, amp, size=(steps, n)) if amp > 0 else np.zeros((steps, n))
    closed = mode == "closed"
    n_gain = 0 if gains is None else gains.shape[0]
    state = AdaptiveState.start(gamma, dt, np.zeros(n)) if (closed and gamma is not None) else None

    t0 = clock()
    q = np.empty((steps + 1, n))
    cmd = np.empty((steps, n))
    q[0] = x_ref[0]
    v = np.zeros(n)
    delay = plant.actuation_delay
    f = plant.viscous_friction
    for k in range(steps):
        c = u_ref[k].copy()
        if closed:
            dev = q[k] - x_ref[k]
            if n_gain:
                # the settle hold keeps the last gain
                c += gains[min(k, n_gain - 1)] @ dev
            if state is not None:
                lam, state = lambda_fn(state, -dev)
                c += state.gamma * lam
        cmd[k] = c
        applied = cmd[k - delay] if k >= delay else np.zeros(n)
        v = np.clip(applied, -limit, limit) - f * v
        q[k + 1] = q[k] + dt * v + dt * noise[k]
        if not np.all(np.isfinite(q[k + 1])):
            # unstable execution is recorded, not raised
            q[k + 1:] = np.nan
            cmd[k + 1:] = np.nan
            break
    elapsed = clock() - t0
    return ExecutionLog(q=q, u=cmd, ee=ee_positions(model, q), dt=dt, planning_time=planning_time,
                        execution_time=elapsed, mode=mode, method=method)
