"""Shared linear-algebra helpers: relative-threshold ranks, truncated
pseudoinverses, Krylov matrices and subspace operations.

Every rank-type decision in the package goes through ``numerical_rank`` (or
the singular-value policy implemented here) so thresholds stay consistent.
"""

import numpy as np
from scipy import linalg

DEFAULT_REL_TOL = 1e-8

__all__ = [
    "DEFAULT_REL_TOL",
    "as_matrix",
    "relative_rank",
    "relative_pinv",
    "orthonormal_range",
    "controllability_matrix",
    "observability_matrix",
    "subspace_intersection",
]


def as_matrix(value, name="matrix"):
    """Coerce to a 2-D float array, rejecting non-finite entries."""
    from .errors import ValidationError

    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def relative_rank(m, rel_tol=DEFAULT_REL_TOL):
    """Number of singular values above ``rel_tol`` times the largest one.

    The zero matrix has rank 0; the threshold is relative, so scaling the
    matrix never changes the answer.
    """
    sigma = linalg.svdvals(m)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rel_tol * sigma[0]))


def relative_pinv(m, rel_tol=DEFAULT_REL_TOL):
    """Moore-Penrose pseudoinverse with singular values below
    ``rel_tol * sigma_max`` truncated to zero."""
    u, sigma, vt = linalg.svd(m, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    keep = sigma > rel_tol * sigma[0]
    inv = np.zeros_like(sigma)
    inv[keep] = 1.0 / sigma[keep]
    return (vt.T * inv) @ u.T


def orthonormal_range(m, rel_tol=DEFAULT_REL_TOL):
    """Orthonormal basis (as columns) of the column space of ``m``."""
    u, sigma, _ = linalg.svd(m, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((m.shape[0], 0))
    keep = int(np.count_nonzero(sigma > rel_tol * sigma[0]))
    return u[:, :keep]


def controllability_matrix(a, b):
    """Krylov matrix [B, AB, ..., A^(n-1)B], shape (n, n*m)."""
    n = a.shape[0]
    blocks = []
    v = b
    for _ in range(n):
        blocks.append(v)
        v = a @ v
    return np.hstack(blocks)


def observability_matrix(a, c, block_rows=None):
    """Stacked matrix [C; CA; ...; CA^(t-1)], default t = n."""
    t = a.shape[0] if block_rows is None else block_rows
    blocks = []
    v = c
    for _ in range(t):
        blocks.append(v)
        v = v @ a
    return np.vstack(blocks)


def subspace_intersection(basis_r, basis_w, cos_tol=1e-8):
    """Orthonormal basis of the intersection of two subspaces.

    ``basis_r`` and ``basis_w`` must have orthonormal columns. Directions are
    accepted when the principal angle between the subspaces satisfies
    cos(theta) >= 1 - cos_tol; the result spans those common directions.
    """
    if basis_r.shape[1] == 0 or basis_w.shape[1] == 0:
        return np.zeros((basis_r.shape[0], 0))
    u, cosines, _ = linalg.svd(basis_r.T @ basis_w, full_matrices=False)
    keep = int(np.count_nonzero(cosines >= 1.0 - cos_tol))
    if keep == 0:
        return np.zeros((basis_r.shape[0], 0))
    vectors = basis_r @ u[:, :keep]
    # Re-orthonormalize: products of orthonormal factors are orthonormal only
    # up to rounding.
    q, _ = linalg.qr(vectors, mode="economic")
    return q
