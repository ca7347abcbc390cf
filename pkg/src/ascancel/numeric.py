"""Complex vector/matrix helpers shared by the constructions and the simulator.

Vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``; the
helpers here only add validation and the handful of operations that need a
fixed convention (the left Kronecker product, rank/condition metrics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

DEFAULT_RANK_TOL = 1e-9


def as_cvector(values) -> np.ndarray:
    """Return ``values`` as a finite, non-empty 1-D complex array."""
    v = np.asarray(values, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("vector must have at least one entry")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_cmatrix(values) -> np.ndarray:
    """Return ``values`` as a finite, non-empty 2-D complex array."""
    m = np.asarray(values, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if m.size == 0:
        raise ValueError("matrix must have at least one entry")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def kron_left(u, v) -> np.ndarray:
    """Left Kronecker product of two vectors.

    The first operand varies fastest: entry ``q * len(u) + p`` of the result
    is ``u[p] * v[q]``.  This is ``numpy.kron(v, u)``.

    >>> kron_left([1, 2], [1, 10, 100])
    array([  1.+0.j,   2.+0.j,  10.+0.j,  20.+0.j, 100.+0.j, 200.+0.j])
    """
    u = as_cvector(u)
    v = as_cvector(v)
    return np.kron(v, u)


def kron_left_chain(vectors) -> np.ndarray:
    """Fold ``kron_left`` over ``vectors`` from the left."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("need at least one vector")
    return reduce(kron_left, vectors[1:], as_cvector(vectors[0]))


@dataclass(frozen=True)
class SpectralMetrics:
    """Singular-value summary of a matrix."""

    sigma_max: float
    sigma_min: float
    numeric_rank: int
    condition_number: float

    @property
    def is_full_rank(self) -> bool:
        return math.isfinite(self.condition_number)


def _metrics_from_singular_values(sv: np.ndarray, tol: float) -> SpectralMetrics:
    s_max = float(sv[0])
    s_min = float(sv[-1])
    rank = int(np.count_nonzero(sv > tol * s_max)) if s_max > 0 else 0
    if rank < sv.size:
        cond = math.inf
    else:
        cond = s_max / s_min
    return SpectralMetrics(s_max, s_min, rank, cond)


def spectral_metrics(m, tol: float = DEFAULT_RANK_TOL) -> SpectralMetrics:
    """Rank and condition number of ``m`` from its singular values.

    A singular value counts toward the rank iff it exceeds ``tol * sigma_max``.
    The condition number is reported as ``inf`` whenever the matrix is
    numerically rank deficient, so a finite value always means full rank.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    m = as_cmatrix(m)
    sv = np.linalg.svd(m, compute_uv=False)
    return _metrics_from_singular_values(sv, tol)


def batch_condition_numbers(stack: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Condition numbers of a stack of equally-shaped matrices.

    Uses the same rank rule as :func:`spectral_metrics`; rank-deficient
    members get ``inf``.
    """
    sv = np.linalg.svd(stack, compute_uv=False)
    s_max = sv[..., 0]
    s_min = sv[..., -1]
    full = s_min > tol * s_max
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(full, s_max / np.where(full, s_min, 1.0), np.inf)
    return cond


def hermitian(m) -> np.ndarray:
    """Conjugate transpose."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim == 1:
        return m.conj()
    if m.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {m.shape}")
    return m.conj().T


def matmul(a, b) -> np.ndarray:
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def matvec(a, x) -> np.ndarray:
    a = as_cmatrix(a)
    x = as_cvector(x)
    if a.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ ({x.shape[0]},)")
    return a @ x


def null_space_basis(a, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of ``a^H``.

    Equivalently, of the orthogonal complement of the column span of ``a``.
    """
    a = as_cmatrix(a)
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    rank = int(np.count_nonzero(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return u[:, rank:]
