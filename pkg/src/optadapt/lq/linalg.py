"""SVD-based pseudoinverse and orthonormal nullspace basis."""

import numpy as np

RCOND = 1e-10


def _svd(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    cutoff = RCOND * s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff)) if s.size and s[0] > 0 else 0
    return U, s, Vt, rank


def pseudoinverse(M) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``1e-10 * s_max`` count as zero."""
    M = np.asarray(M, dtype=float)
    p, q = M.shape
    if p == 0 or q == 0:
        return np.zeros((q, p))
    U, s, Vt, rank = _svd(M)
    return (Vt[:rank].T / s[:rank]) @ U[:, :rank].T


def nullspace_basis(M) -> np.ndarray:
    """Orthonormal columns spanning ``ker(M)``.

    A matrix with no rows has the whole input space as kernel, so the
    identity is returned.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("nullspace_basis expects a 2-D matrix")
    p, q = M.shape
    if p == 0:
        return np.eye(q)
    _, _, Vt, rank = _svd(M)
    return Vt[rank:].T.copy()
