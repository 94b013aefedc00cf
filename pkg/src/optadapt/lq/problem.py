"""Quadratic tracking problem and its second-order expansion about a nominal."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DimensionError, ValidationError


def _check_sym_psd(name, M, strict=False):
    if not np.allclose(M, M.T, atol=1e-12, rtol=0):
        raise ValidationError(f"{name} must be symmetric")
    low = np.linalg.eigvalsh(M).min() if M.size else 0.0
    if strict and low <= 0:
        raise ValidationError(f"{name} must be positive definite")
    if low < -1e-12:
        raise ValidationError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class ProblemSpec:
    """Tracking cost over ``N`` steps.

    Running cost (weights are per step)::

        f_i = 1/2 dx' Wx dx + 1/2 du' Wu du + du' Wux dx,
        dx = x - x_ref[i],  du = u - u_ref[i]

    Terminal cost: ``1/2 (x - goal)' QN (x - goal) + qN' (x - goal)``.
    """

    x0: np.ndarray
    goal: np.ndarray
    horizon: int
    dt: float
    state_weight: np.ndarray
    input_weight: np.ndarray
    terminal_weight: np.ndarray
    cross_weight: Optional[np.ndarray] = None
    terminal_linear: Optional[np.ndarray] = None
    x_ref: Optional[np.ndarray] = None  # (N + 1, n); defaults to the goal
    u_ref: Optional[np.ndarray] = None  # (N, m); defaults to zero

    def __post_init__(self):
        n = np.shape(self.x0)[0]
        m = np.shape(self.input_weight)[0]
        fix = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        fix("x0", np.asarray(self.x0, float))
        fix("goal", np.asarray(self.goal, float))
        for name in ("state_weight", "input_weight", "terminal_weight"):
            fix(name, np.asarray(getattr(self, name), float))
        fix("cross_weight", np.zeros((m, n)) if self.cross_weight is None else np.asarray(self.cross_weight, float))
        fix("terminal_linear", np.zeros(n) if self.terminal_linear is None else np.asarray(self.terminal_linear, float))
        x_ref = self.goal if self.x_ref is None else self.x_ref
        u_ref = np.zeros(m) if self.u_ref is None else self.u_ref
        fix("x_ref", np.broadcast_to(np.asarray(x_ref, float), (self.horizon + 1, n)))
        fix("u_ref", np.broadcast_to(np.asarray(u_ref, float), (self.horizon, m)))
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")
        if self.goal.shape != (n,):
            raise DimensionError("goal and x0 must have the same length")
        shapes = {"state_weight": (n, n), "input_weight": (m, m), "terminal_weight": (n, n),
                  "cross_weight": (m, n), "terminal_linear": (n,)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} must have shape {shape}")
        _check_sym_psd("state_weight", self.state_weight)
        _check_sym_psd("terminal_weight", self.terminal_weight)
        _check_sym_psd("input_weight", self.input_weight, strict=True)

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def m(self) -> int:
        return self.input_weight.shape[0]

    @classmethod
    def regulate(cls, x0, goal, horizon, dt, state_weight, input_weight, terminal_weight, **kw):
        """Regulation to a fixed goal with zero reference input."""
        return cls(x0=x0, goal=goal, horizon=horizon, dt=dt, state_weight=state_weight,
                   input_weight=input_weight, terminal_weight=terminal_weight, **kw)

    @classmethod
    def track(cls, path, goal, *, state_rate=100.0, input_rate=1.0, terminal=1e4):
        """Track a reference path with a terminal pull to ``goal``.

        Rates are per second of horizon and become per-step weights through
        ``dt``; scalars or per-joint vectors are accepted.
        """
        x_ref = np.asarray(path.x_des, float)
        u_ref = np.asarray(path.u_des, float)
        n, m = x_ref.shape[1], u_ref.shape[1]
        dt = path.dt
        return cls(
            x0=x_ref[0], goal=goal, horizon=u_ref.shape[0], dt=dt,
            state_weight=dt * np.diag(np.broadcast_to(state_rate, (n,)).astype(float)),
            input_weight=dt * np.diag(np.broadcast_to(input_rate, (m,)).astype(float)),
            terminal_weight=np.diag(np.broadcast_to(terminal, (n,)).astype(float)),
            x_ref=x_ref, u_ref=u_ref,
        )

    def stage_costs(self, x, u) -> np.ndarray:
        """Running cost of each step for trajectories ``x (N+1, n)``, ``u (N, m)``."""
        dx = x[:-1] - self.x_ref[:-1]
        du = u - self.u_ref
        cost = 0.5 * ((dx @ self.state_weight) * dx).sum(axis=1)
        cost += 0.5 * ((du @ self.input_weight) * du).sum(axis=1)
        if np.any(self.cross_weight):
            cost += ((du @ self.cross_weight) * dx).sum(axis=1)
        return cost

    def terminal_cost(self, xN) -> float:
        e = xN - self.goal
        return float(0.5 * e @ self.terminal_weight @ e + self.terminal_linear @ e)

    def total_cost(self, x, u) -> float:
        return float(self.stage_costs(x, u).sum()) + self.terminal_cost(x[-1])


@dataclass
class LQCoefficients:
    """Per-step expansion ``o + q'dx + r'du + 1/2 dx'Q dx + 1/2 du'R du + du'P dx``
    with dynamics ``dx[i+1] = A[i] dx[i] + B[i] du[i]``.

    Arrays carry a leading step axis; constant blocks may be broadcast views.
    """

    o: np.ndarray  # (N,)
    q: np.ndarray  # (N, n)
    r: np.ndarray  # (N, m)
    Q: np.ndarray  # (N, n, n)
    R: np.ndarray  # (N, m, m)
    P: np.ndarray  # (N, m, n)
    oN: float
    qN: np.ndarray
    QN: np.ndarray
    A: np.ndarray  # (N, n, n)
    B: np.ndarray  # (N, n, m)

    @property
    def horizon(self) -> int:
        return self.o.shape[0]

    def step(self, i):
        return dict(o=self.o[i], q=self.q[i], r=self.r[i], Q=self.Q[i], R=self.R[i], P=self.P[i],
                    A=self.A[i], B=self.B[i])

    def model_cost(self, dx, du) -> float:
        """Value of the expansion for displacement trajectories."""
        stage = (self.o.sum() + np.einsum("ti,ti->", self.q, dx[:-1]) + np.einsum("ti,ti->", self.r, du)
                 + 0.5 * np.einsum("ti,tij,tj->", dx[:-1], self.Q, dx[:-1])
                 + 0.5 * np.einsum("ti,tij,tj->", du, self.R, du)
                 + np.einsum("ti,tij,tj->", du, self.P, dx[:-1]))
        e = dx[-1]
        return float(stage + self.oN + self.qN @ e + 0.5 * e @ self.QN @ e)


def _nominal_arrays(nominal):
    if hasattr(nominal, "x_des"):
        return np.asarray(nominal.x_des, float), np.asarray(nominal.u_des, float)
    x, u = nominal
    return np.asarray(x, float), np.asarray(u, float)


def expand_cost(spec: ProblemSpec, nominal, A=None, B=None) -> LQCoefficients:
    """Second-order expansion of the tracking cost about ``nominal``.

    ``nominal`` is an :class:`~optadapt.adaptive.InitialPath` or an
    ``(x, u)`` pair. The cost is quadratic, so the expansion is exact.
    ``A`` and ``B`` (constant or per step) are the linearized dynamics;
    they default to the velocity integrator ``I, dt I``.
    """
    x, u = _nominal_arrays(nominal)
    N, n, m = spec.horizon, spec.n, spec.m
    if x.shape != (N + 1, n) or u.shape != (N, m):
        raise DimensionError(f"nominal covers {u.shape[0]} steps, problem horizon is {N}")
    dx = x[:-1] - spec.x_ref[:-1]
    du = u - spec.u_ref
    Wx, Wu, Wux = spec.state_weight, spec.input_weight, spec.cross_weight
    eN = x[-1] - spec.goal
    A = np.eye(n) if A is None else np.asarray(A, float)
    B = spec.dt * np.eye(n, m) if B is None else np.asarray(B, float)
    return LQCoefficients(
        o=spec.stage_costs(x, u),
        q=dx @ Wx.T + du @ Wux,
        r=du @ Wu.T + dx @ Wux.T,
        Q=np.broadcast_to(Wx, (N, n, n)),
        R=np.broadcast_to(Wu, (N, m, m)),
        P=np.broadcast_to(Wux, (N, m, n)),
        oN=spec.terminal_cost(x[-1]),
        qN=spec.terminal_weight @ eN + spec.terminal_linear,
        QN=spec.terminal_weight,
        A=np.broadcast_to(A, (N, n, n)),
        B=np.broadcast_to(B, (N, n, m)),
    )
