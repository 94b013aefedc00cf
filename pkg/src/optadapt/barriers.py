"""Potential-field barriers for joint limits and their per-step linearization.

Each barrier is zero outside an activation band of width ``rho0`` next to a
limit and grows as ``eta (1/rho - 1/rho0) / rho**2`` inside it, where ``rho``
is the distance to the limit. Magnitudes are capped at ``cap``; at or past
the limit the barrier sits on the cap with zero slope.

Linearized rows feed the equality-constrained subproblem. Minimum limits
go to the ``D, e`` block and maximum limits to the ``C, d`` block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_RHO0 = 0.05
DEFAULT_ETA = 1e-3
DEFAULT_CAP = 1e6
# points deeper than this fraction of rho0 are linearized at this depth
DEFAULT_ANCHOR = 0.8


@dataclass(frozen=True)
class JointLimitBarrier:
    joint_index: int
    x_min: float
    x_max: float
    rho0_min: float = DEFAULT_RHO0
    rho0_max: float = DEFAULT_RHO0
    eta_gain: float = DEFAULT_ETA
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValidationError(f"barrier on joint {self.joint_index}: x_min must be below x_max")
        if self.rho0_min <= 0 or self.rho0_max <= 0:
            raise ValidationError(f"barrier on joint {self.joint_index}: activation distances must be positive")
        if self.eta_gain <= 0 or self.cap <= 0:
            raise ValidationError(f"barrier on joint {self.joint_index}: eta and cap must be positive")


def _field(rho, rho0, eta):
    return eta * (1.0 / rho - 1.0 / rho0) / rho ** 2


def _field_slope(rho, rho0, eta):
    """d/d(rho) of the uncapped field."""
    return -eta * (3.0 / rho ** 4 - 2.0 / (rho0 * rho ** 3))


def _magnitude(rho, rho0, eta, cap):
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    inside = (rho > 0) & (rho <= rho0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside, np.minimum(_field(rho, rho0, eta), cap), out)
    return np.where(rho <= 0, cap, out)


def barrier_min(x, barrier: JointLimitBarrier):
    """Minimum-limit barrier (non-negative)."""
    v = _magnitude(np.asarray(x, float) - barrier.x_min, barrier.rho0_min, barrier.eta_gain, barrier.cap)
    return v[()] if np.ndim(v) == 0 else v


def barrier_max(x, barrier: JointLimitBarrier):
    """Maximum-limit barrier (non-positive)."""
    v = -_magnitude(barrier.x_max - np.asarray(x, float), barrier.rho0_max, barrier.eta_gain, barrier.cap)
    return v[()] if np.ndim(v) == 0 else v


def _slope(rho, rho0, eta, cap):
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        live = (rho > 0) & (rho <= rho0) & (_field(rho, rho0, eta) < cap)
        return np.where(live, _field_slope(rho, rho0, eta), 0.0)


def barrier_gradient(x, barrier: JointLimitBarrier, side="min"):
    """Derivative with respect to ``x`` of ``barrier_min`` (``side="min"``) or ``barrier_max``.

    Zero outside the activation band and on the cap plateau.
    """
    x = np.asarray(x, float)
    if side == "min":
        g = _slope(x - barrier.x_min, barrier.rho0_min, barrier.eta_gain, barrier.cap)
    elif side == "max":
        # barrier_max(x) = -f(x_max - x), so d/dx = f'(rho)
        g = _slope(barrier.x_max - x, barrier.rho0_max, barrier.eta_gain, barrier.cap)
    else:
        raise ValueError("side must be 'min' or 'max'")
    return g[()] if np.ndim(g) == 0 else g


@dataclass
class LinearizedConstraints:
    """Per-step equality rows ``D[i] dx[i] = e[i]`` and ``C[i] dx[i] = d[i]``.

    Lists are indexed by step ``0..N``; inactive steps hold 0-row blocks.
    """

    D: List[np.ndarray]
    e: List[np.ndarray]
    C: List[np.ndarray]
    d: List[np.ndarray]

    @property
    def n_steps(self) -> int:
        return len(self.D)

    def stacked(self, i):
        """``([D; C], [e; d])`` at step ``i``."""
        return np.vstack([self.D[i], self.C[i]]), np.concatenate([self.e[i], self.d[i]])

    def row_count(self, i) -> int:
        return self.D[i].shape[0] + self.C[i].shape[0]

    def active_steps(self) -> np.ndarray:
        return np.array([i for i in range(self.n_steps) if self.row_count(i)], dtype=int)

    def total_rows(self) -> int:
        return sum(self.row_count(i) for i in range(self.n_steps))

    def padded(self):
        """Dense arrays ``(rows (N+1, k, n), rhs (N+1, k), counts (N+1,))``, min rows first."""
        steps = self.n_steps
        n = self.D[0].shape[1]
        k = max([self.row_count(i) for i in range(steps)] + [1])
        rows = np.zeros((steps, k, n))
        rhs = np.zeros((steps, k))
        counts = np.zeros(steps, dtype=np.int64)
        for i in range(steps):
            c = self.row_count(i)
            if c:
                M, r = self.stacked(i)
                rows[i, :c] = M
                rhs[i, :c] = r
                counts[i] = c
        return rows, rhs, counts


def _rows_for_side(x, barrier, side, anchor, margin=0.0):
    """Activation mask, gradient rows and right-hand sides along a joint trajectory."""
    if side == "min":
        rho = x - barrier.x_min
        rho0 = barrier.rho0_min
        sign = 1.0  # d(rho)/dx, also the sign of the barrier value
    else:
        rho = barrier.x_max - x
        rho0 = barrier.rho0_max
        sign = -1.0
    active = rho <= rho0 * (1.0 + margin)
    # evaluated on rho directly: recovering it from a shifted x can land just past rho0
    rho_lin = np.clip(rho, anchor * rho0, rho0)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = _field_slope(rho_lin, rho0, barrier.eta_gain)
        value = sign * np.minimum(_field(rho_lin, rho0, barrier.eta_gain), barrier.cap)
    # row: grad * (x_nominal + dx - x_lin) + value = 0, with x_nominal - x_lin = sign * (rho - rho_lin)
    rhs = -(value + grad * sign * (rho - rho_lin))
    return active, grad, rhs


def linearize_arrays(barriers: Sequence[JointLimitBarrier], x_nominal, anchor=DEFAULT_ANCHOR, margin=0.0):
    """Vectorized linearization in padded form.

    ``margin`` widens activation to ``rho <= rho0 * (1 + margin)``; points
    just outside the band are linearized at its edge, which pins them there.

    Returns ``(rows (T, k, n), rhs (T, k), n_min (T,), n_max (T,))`` with the
    minimum-limit rows of each step first.
    """
    x_nominal = np.asarray(x_nominal, dtype=float)
    steps, n = x_nominal.shape
    entries = []
    for side in ("min", "max"):
        for b in barriers:
            if not 0 <= b.joint_index < n:
                raise ValidationError(f"barrier joint index {b.joint_index} out of range")
            active, grad, rhs = _rows_for_side(x_nominal[:, b.joint_index], b, side, anchor, margin)
            entries.append((side, b.joint_index, active, grad, rhs))
    n_min = np.zeros(steps, dtype=np.int64)
    n_max = np.zeros(steps, dtype=np.int64)
    for side, _, active, _, _ in entries:
        (n_min if side == "min" else n_max)[:] += active
    k = int(max((n_min + n_max).max(initial=0), 1))
    rows = np.zeros((steps, k, n))
    rhs_all = np.zeros((steps, k))
    slot = np.zeros(steps, dtype=np.int64)
    for _, j, active, grad, rhs in entries:
        idx = np.flatnonzero(active)
        rows[idx, slot[idx], j] = grad[idx]
        rhs_all[idx, slot[idx]] = rhs[idx]
        slot[idx] += 1
    return rows, rhs_all, n_min, n_max


def linearize_constraints(barriers: Sequence[JointLimitBarrier], x_nominal, anchor=DEFAULT_ANCHOR) -> LinearizedConstraints:
    """One row per barrier and step whose activation band contains the nominal point.

    Rows carry the barrier gradient and ``-value`` so that ``D dx = e``
    drives the barrier to zero to first order. Nominal points deeper than
    ``anchor * rho0`` (including saturated ones past the limit) are
    linearized at that depth instead, where the slope is finite.
    """
    rows, rhs, n_min, n_max = linearize_arrays(barriers, x_nominal, anchor)
    D, e, C, d = [], [], [], []
    for i in range(rows.shape[0]):
        a, b = n_min[i], n_min[i] + n_max[i]
        D.append(rows[i, :a].copy())
        e.append(rhs[i, :a].copy())
        C.append(rows[i, a:b].copy())
        d.append(rhs[i, a:b].copy())
    return LinearizedConstraints(D, e, C, d)


def default_barriers(joint_min, joint_max, rho0=DEFAULT_RHO0, eta=DEFAULT_ETA, cap=DEFAULT_CAP):
    """One barrier per joint over the given bounds."""
    return [JointLimitBarrier(j, float(lo), float(hi), rho0, rho0, eta, cap)
            for j, (lo, hi) in enumerate(zip(joint_min, joint_max))]


def barrier_values(barriers, x):
    """Sum of barrier magnitudes at each row of ``x`` (shape (T, n)) -> (T,)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[0])
    for b in barriers:
        xj = x[:, b.joint_index]
        total += barrier_min(xj, b) - barrier_max(xj, b)
    return total
