"""Independent dense solvers used as ground truth in the tests."""

import numpy as np

from optadapt.barriers import LinearizedConstraints
from optadapt.lq.problem import LQCoefficients


def kkt_solve(coeffs: LQCoefficients, lin: LinearizedConstraints, dx0=None):
    """Minimize the expansion subject to dynamics and per-step rows by one dense KKT solve.

    Variables are stacked as ``[dx_0 .. dx_N, du_0 .. du_{N-1}]``.
    Returns ``(du (N, m), dx (N + 1, n))``.
    """
    N = coeffs.horizon
    n = coeffs.A.shape[1]
    m = coeffs.B.shape[2]
    nx = (N + 1) * n
    nz = nx + N * m
    xs = lambda i: slice(i * n, (i + 1) * n)  # noqa: E731
    us = lambda i: slice(nx + i * m, nx + (i + 1) * m)  # noqa: E731

    H = np.zeros((nz, nz))
    c = np.zeros(nz)
    for i in range(N):
        H[xs(i), xs(i)] += coeffs.Q[i]
        H[us(i), us(i)] += coeffs.R[i]
        H[us(i), xs(i)] += coeffs.P[i]
        H[xs(i), us(i)] += coeffs.P[i].T
        c[xs(i)] += coeffs.q[i]
        c[us(i)] += coeffs.r[i]
    H[xs(N), xs(N)] += coeffs.QN
    c[xs(N)] += coeffs.qN

    rows, rhs = [], []
    block = np.zeros((n, nz))
    block[:, xs(0)] = np.eye(n)
    rows.append(block)
    rhs.append(np.zeros(n) if dx0 is None else np.asarray(dx0, float))
    for i in range(N):
        block = np.zeros((n, nz))
        block[:, xs(i + 1)] = np.eye(n)
        block[:, xs(i)] = -coeffs.A[i]
        block[:, us(i)] = -coeffs.B[i]
        rows.append(block)
        rhs.append(np.zeros(n))
    for i in range(1, N + 1):
        M, r = lin.stacked(i)
        if M.shape[0]:
            block = np.zeros((M.shape[0], nz))
            block[:, xs(i)] = M
            rows.append(block)
            rhs.append(r)
    C = np.vstack(rows)
    d = np.concatenate(rhs)
    K = np.block([[H, C.T], [C, np.zeros((C.shape[0], C.shape[0]))]])
    sol = np.linalg.solve(K, np.concatenate([-c, d]))
    z = sol[:nz]
    return z[nx:].reshape(N, m), z[:nx].reshape(N + 1, n)
