"""The few dense float64 matrix operations the ESZSL closed form needs."""

from __future__ import annotations

import numpy as np
import scipy.linalg

COND_LIMIT = 1e12


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=np.float64, ndmin=2)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension-mismatch: {a.shape} x {b.shape}")
    return a @ b


def add_scaled_identity(a, c: float) -> np.ndarray:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"non-square matrix {a.shape}")
    out = a.copy()
    out[np.diag_indices_from(out)] += c
    return out


def solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b``: LDL^T for symmetric ``a``, LU otherwise. No inverse is formed."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"non-square matrix {a.shape}")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension-mismatch: {a.shape} vs {b.shape}")
    if not _rcond_ok(a):
        raise SingularMatrixError("singular-matrix: condition estimate exceeds limit")
    symmetric = np.array_equal(a, a.T)
    return scipy.linalg.solve(a, b, assume_a="sym" if symmetric else "gen")


def _rcond_ok(a) -> bool:
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(a)
    return bool(np.isfinite(cond) and cond < COND_LIMIT)
