"""Dense linear-algebra helpers used by the field and flag machinery."""

from __future__ import annotations

import numpy as np


def svd_rank(mat: np.ndarray, tol: float = 1e-8) -> int:
    """Rank of the row span: count singular values above tol * largest."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def orthonormal_rows(mat: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (as rows) of the row space of `mat`."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return np.zeros((0, mat.shape[1] if mat.ndim == 2 else 0))
    _, s, vt = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, mat.shape[1]))
    r = int(np.count_nonzero(s > tol * s[0]))
    return vt[:r]


def subspace_angle(a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> float:
    """Largest principal angle (radians) between the row spans of a and b.

    Computed through the sine of the angle, which stays accurate when the
    spans nearly coincide (arccos loses half the digits there).
    """
    qa = orthonormal_rows(a, tol)
    qb = orthonormal_rows(b, tol)
    if qa.shape[0] == 0 and qb.shape[0] == 0:
        return 0.0
    if qa.shape[0] == 0 or qb.shape[0] == 0:
        return float(np.pi / 2)

    def one_sided(q1: np.ndarray, q2: np.ndarray) -> float:
        resid = q2 - (q2 @ q1.T) @ q1
        s = np.linalg.svd(resid, compute_uv=False)
        top = float(s[0]) if s.size else 0.0
        return float(np.arcsin(min(1.0, top)))

    return max(one_sided(qa, qb), one_sided(qb, qa))


def component_out_of_span(vec: np.ndarray, basis_rows: np.ndarray,
                          tol: float = 1e-8) -> float:
    """Norm of the component of `vec` orthogonal to the row span."""
    q = orthonormal_rows(basis_rows, tol)
    if q.shape[0] == 0:
        return float(np.linalg.norm(vec))
    resid = vec - (vec @ q.T) @ q
    return float(np.linalg.norm(resid))
