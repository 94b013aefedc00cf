"""Backward Riccati pass and forward rollout on the reduced problem."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import DivergenceError
from .linalg import pseudoinverse
from .nullspace import TildeCoefficients


@dataclass
class RiccatiState:
    S: List[np.ndarray]  # index i holds the value matrix at step i, i = 0..N
    s: List[np.ndarray]


def riccati_backward(tilde: TildeCoefficients, QN=None, qN=None):
    """Gains ``K_i`` and feedforwards ``k_i`` with ``dv_i = -K_i dx_i + k_i``.

    Returns ``(K list, k list, RiccatiState)``. ``QN``/``qN`` default to the
    terminal terms stored on ``tilde``.
    """
    S = np.array(tilde.QN if QN is None else QN, dtype=float)
    s = np.array(tilde.qN if qN is None else qN, dtype=float)
    N = tilde.horizon
    Ks: List[np.ndarray] = [None] * N
    ks: List[np.ndarray] = [None] * N
    S_all = [None] * (N + 1)
    s_all = [None] * (N + 1)
    S_all[N], s_all[N] = S, s
    for i in range(N - 1, -1, -1):
        t = tilde.steps[i]
        s_next = s + S @ t.k
        G = t.P + t.B.T @ S @ t.A
        g = t.r + t.B.T @ s_next
        H = t.R + t.B.T @ S @ t.B
        Hp = pseudoinverse(H)
        K = Hp @ G
        k = -Hp @ g
        S = t.Q + t.A.T @ S @ t.A - G.T @ K
        S = 0.5 * (S + S.T)
        s = t.q + t.A.T @ s_next + G.T @ k
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(s))):
            raise DivergenceError(f"Riccati recursion produced non-finite values at step {i}", step=i)
        Ks[i], ks[i] = K, k
        S_all[i], s_all[i] = S, s
    return Ks, ks, RiccatiState(S_all, s_all)


def forward_pass(tilde: TildeCoefficients, Ks, ks, A, B, dx0=None):
    """Roll ``du_i = Gamma_i dx_i + Theta_i + N_i (-K_i dx_i + k_i)`` through ``(A, B)``.

    Returns ``(du (N, m), dx (N + 1, n), L (N, m, n))`` where ``L_i = Gamma_i - N_i K_i``
    is the total feedback gain on the state displacement.
    """
    N = tilde.horizon
    n = A.shape[-1]
    m = B.shape[-1]
    dx = np.zeros((N + 1, n))
    if dx0 is not None:
        dx[0] = dx0
    du = np.zeros((N, m))
    L = np.zeros((N, m, n))
    for i in range(N):
        t = tilde.steps[i]
        L[i] = t.Gamma - t.N @ Ks[i]
        du[i] = L[i] @ dx[i] + t.Theta + t.N @ ks[i]
        dx[i + 1] = A[i] @ dx[i] + B[i] @ du[i]
    return du, dx, L
