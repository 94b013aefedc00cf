"""Per-step split of the input update into a constrained part and a free nullspace part.

Rows active at step ``i + 1`` are enforced through the input at step ``i``::

    S_i = rows[i+1] B_i,  F_i = rows[i+1] A_i
    du_i = Gamma_i dx_i + Theta_i + N_i dv_i

with ``Gamma_i = -S_i^+ F_i``, ``Theta_i = S_i^+ (rhs[i+1] - F_i alpha)`` and
``N_i`` an orthonormal basis of ``ker(S_i)``. Substituting this into the
expansion gives the reduced ("tilde") problem in ``dv``.

These functions are the readable reference; :mod:`optadapt.lq.kernels`
fuses the same arithmetic over a whole horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..barriers import LinearizedConstraints
from ..errors import DimensionError
from .linalg import nullspace_basis, pseudoinverse
from .problem import LQCoefficients


def propagated_rows(lin: LinearizedConstraints, coeffs: LQCoefficients, i: int):
    """``(S_i, F_i, rhs)`` for the rows of step ``i + 1`` pulled back to step ``i``."""
    rows, rhs = lin.stacked(i + 1)
    return rows @ coeffs.B[i], rows @ coeffs.A[i], rhs


def constrained_component(lin: LinearizedConstraints, coeffs: LQCoefficients, i: int, dx, alpha=None):
    """Constrained input ``(du_c, Gamma_i, Theta_i)`` at step ``i``.

    ``alpha`` is an extra state-feedback vector subtracted inside the
    feedforward (zero while planning). With no rows at step ``i + 1`` the
    step is unconstrained and all three outputs are zero.
    """
    n = coeffs.A.shape[1]
    m = coeffs.B.shape[2]
    dx = np.asarray(dx, dtype=float)
    if dx.shape != (n,):
        raise DimensionError(f"state displacement must have length {n}")
    if lin.row_count(i + 1) == 0:
        return np.zeros(m), np.zeros((m, n)), np.zeros(m)
    S, F, rhs = propagated_rows(lin, coeffs, i)
    Sp = pseudoinverse(S)
    alpha = np.zeros(n) if alpha is None else np.asarray(alpha, float)
    gamma = -Sp @ F
    theta = Sp @ rhs - Sp @ F @ alpha
    return gamma @ dx + theta, gamma, theta


def step_basis(lin: LinearizedConstraints, coeffs: LQCoefficients, i: int) -> np.ndarray:
    """Nullspace basis of the propagated rows at step ``i``."""
    m = coeffs.B.shape[2]
    if lin.row_count(i + 1) == 0:
        return np.eye(m)
    S, _, _ = propagated_rows(lin, coeffs, i)
    return nullspace_basis(S)


@dataclass
class TildeStep:
    A: np.ndarray
    B: np.ndarray
    k: np.ndarray
    o: float
    q: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    Gamma: np.ndarray
    Theta: np.ndarray
    N: np.ndarray

    @property
    def free_inputs(self) -> int:
        return self.N.shape[1]


@dataclass
class TildeCoefficients:
    steps: List[TildeStep]
    oN: float
    qN: np.ndarray
    QN: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.steps)


def reparametrize(step: dict, Gamma, Theta, N_basis) -> TildeStep:
    """Substitute ``du = Gamma dx + Theta + N dv`` into one step of the expansion.

    ``step`` holds ``o, q, r, Q, R, P, A, B`` (see :meth:`LQCoefficients.step`).
    """
    A, B = step["A"], step["B"]
    o, q, r, Q, R, P = (step[k] for k in ("o", "q", "r", "Q", "R", "P"))
    n, m = A.shape[0], B.shape[1]
    Gamma = np.asarray(Gamma, float)
    Theta = np.asarray(Theta, float)
    N = np.asarray(N_basis, float)
    if Gamma.shape != (m, n) or Theta.shape != (m,) or N.ndim != 2 or N.shape[0] != m:
        raise DimensionError("Gamma, Theta and the nullspace basis do not match the step dimensions")
    RT = R @ Theta
    RG = R @ Gamma
    return TildeStep(
        A=A + B @ Gamma,
        B=B @ N,
        k=B @ Theta,
        o=float(o + r @ Theta + 0.5 * Theta @ RT),
        q=q + Gamma.T @ r + P.T @ Theta + Gamma.T @ RT,
        r=N.T @ (r + RT),
        Q=Q + Gamma.T @ RG + Gamma.T @ P + P.T @ Gamma,
        R=N.T @ R @ N,
        P=N.T @ (P + RG),
        Gamma=Gamma,
        Theta=Theta,
        N=N,
    )


def build_tilde(coeffs: LQCoefficients, lin: LinearizedConstraints, alpha=None) -> TildeCoefficients:
    """Reduced problem over the whole horizon (reference path, one step at a time)."""
    N = coeffs.horizon
    if lin.n_steps != N + 1:
        raise DimensionError(f"constraints cover {lin.n_steps} states, horizon needs {N + 1}")
    n = coeffs.A.shape[1]
    steps = []
    for i in range(N):
        _, gamma, theta = constrained_component(lin, coeffs, i, np.zeros(n), alpha)
        steps.append(reparametrize(coeffs.step(i), gamma, theta, step_basis(lin, coeffs, i)))
    return TildeCoefficients(steps, coeffs.oN, np.asarray(coeffs.qN), np.asarray(coeffs.QN))
