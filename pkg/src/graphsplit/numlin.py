"""Dense linear algebra helpers.

Everything here works on plain ``numpy`` arrays. A *block* is an array whose
leading axis enumerates stacked vectors of the product space; any further axes
are carried along untouched, which is how batched runs are expressed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

DEFAULT_RANK_TOL = 1e-12


def as_matrix(A, name="matrix"):
    """Return ``A`` as a finite 2-D float array or raise InvalidInputError."""
    arr = np.array(A, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def pseudoinverse(A, rank_tol=DEFAULT_RANK_TOL):
    """Moore-Penrose pseudoinverse via the SVD.

    Singular values at or below ``rank_tol`` times the largest one are
    treated as zero.
    """
    A = as_matrix(A)
    if rank_tol <= 0:
        raise InvalidInputError("rank_tol must be positive")
    if A.size == 0:
        return np.zeros((A.shape[1], A.shape[0]))
    return np.linalg.pinv(A, rcond=rank_tol)


def spectral_norm(A):
    """Largest singular value (0 for an empty matrix)."""
    A = as_matrix(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def min_eigenvalue(S):
    """Smallest eigenvalue of the symmetric part of a square matrix."""
    S = as_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got {S.shape}")
    if S.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])


def is_psd(S, tol=1e-9):
    """True when the symmetrized matrix has no eigenvalue below ``-tol``."""
    return min_eigenvalue(S) >= -tol


def numerical_rank(A, rank_tol=DEFAULT_RANK_TOL):
    A = as_matrix(A)
    if A.size == 0:
        return 0
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


def kernel_dimension(A, rank_tol=DEFAULT_RANK_TOL):
    A = as_matrix(A)
    return A.shape[1] - numerical_rank(A, rank_tol)


def kernel_is_span_ones(Mt, tol=1e-9):
    """Check that the null space of ``Mt`` is exactly the line through 1."""
    Mt = as_matrix(Mt)
    cols = Mt.shape[1]
    ones = np.ones(cols)
    scale = max(1.0, float(np.abs(Mt).max(initial=0.0)))
    if np.linalg.norm(Mt @ ones) > tol * scale * np.sqrt(cols):
        return False
    return kernel_dimension(Mt, rank_tol=max(tol, DEFAULT_RANK_TOL)) == 1


def lift_apply(A, b):
    """Apply ``A`` kron Id to a block: row ``i`` of the result is sum_j A_ij b_j."""
    A = as_matrix(A)
    b = np.asarray(b, dtype=float)
    if b.ndim < 1 or b.shape[0] != A.shape[1]:
        raise InvalidInputError(
            f"cannot apply a {A.shape} matrix to a block with {b.shape[0] if b.ndim else 0} rows"
        )
    return np.tensordot(A, b, axes=(1, 0))


def matrix_to_dict(A):
    A = as_matrix(A)
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]), "data": A.ravel().tolist()}


def matrix_from_dict(doc):
    try:
        rows, cols, data = int(doc["rows"]), int(doc["cols"]), doc["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad matrix document: {exc}") from exc
    if len(data) != rows * cols:
        raise InvalidInputError(f"matrix data has {len(data)} entries, expected {rows * cols}")
    return as_matrix(np.asarray(data, dtype=float).reshape(rows, cols))


def load_matrix(path):
    return matrix_from_dict(json.loads(Path(path).read_text()))


def save_matrix(A, path):
    Path(path).write_text(json.dumps(matrix_to_dict(A)))
