"""Unit-modulus cancellers for a single interferer.

Both schemes first de-rotate the array with a diagonal phase compensation
(turning the interferer's steering vector into the all-one vector) and then
apply a transform whose rows are orthogonal to the all-one vector: a DFT
matrix or a normalised Hadamard matrix with the all-one row removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import SteeringParams, steering_vector
from .numeric import as_cmatrix


class UnsupportedHadamardOrder(ValueError):
    """No Hadamard construction is available for the requested order."""


@dataclass(frozen=True)
class CostReport:
    phase_shifters: int
    adders: int


@dataclass(frozen=True)
class PhaseMatrix:
    """A cancellation matrix whose entries all have unit modulus."""

    matrix: np.ndarray
    provenance: str
    cost: CostReport | None = field(default=None, compare=False)

    def __post_init__(self):
        m = as_cmatrix(self.matrix)
        if m.shape[0] > m.shape[1]:
            raise ValueError(f"cancellation matrix must be wide, got shape {m.shape}")
        if not np.allclose(np.abs(m), 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("cancellation matrix entries must have unit modulus")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def phase_compensation(p: SteeringParams) -> np.ndarray:
    """``diag(1, e^{-j theta}, ..., e^{-j (N-1) theta})``."""
    return np.diag(steering_vector(p).conj())


def truncated_fourier(n: int) -> np.ndarray:
    """DFT rows ``1 .. n-1`` with ``w = e^{-j 2 pi / n}``; the all-one row is dropped."""
    if n < 2:
        raise ValueError(f"order must be at least 2, got {n}")
    l = np.arange(1, n)[:, None]
    k = np.arange(n)[None, :]
    return np.exp(-2j * np.pi * ((l * k) % n) / n)


# --- Hadamard matrices -----------------------------------------------------

def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def _jacobsthal(q: int) -> np.ndarray:
    # q prime: Q[i, j] = legendre(j - i mod q)
    residues = {(x * x) % q for x in range(1, q)}
    chi = np.array([0] + [1 if a in residues else -1 for a in range(1, q)])
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q
    return chi[idx]


def _paley_one(q: int) -> np.ndarray:
    # q prime, q = 3 (mod 4): order q + 1
    Q = _jacobsthal(q)
    n = q + 1
    S = np.zeros((n, n), dtype=int)
    S[0, 1:] = 1
    S[1:, 0] = -1
    S[1:, 1:] = Q
    return np.eye(n, dtype=int) + S


def _paley_two(q: int) -> np.ndarray:
    # q prime, q = 1 (mod 4): order 2 (q + 1)
    Q = _jacobsthal(q)
    n = q + 1
    C = np.zeros((n, n), dtype=int)
    C[0, 1:] = 1
    C[1:, 0] = 1
    C[1:, 1:] = Q
    A = np.array([[1, 1], [1, -1]])
    B = np.array([[1, -1], [-1, -1]])
    return np.kron(C, A) + np.kron(np.eye(n, dtype=int), B)


def _normalize(H: np.ndarray) -> np.ndarray:
    # first row and first column all +1
    H = H * H[0][None, :]
    return H * H[:, 0][:, None]


@lru_cache(maxsize=None)
def _hadamard(n: int) -> np.ndarray | None:
    if n == 1:
        return np.ones((1, 1), dtype=int)
    if n == 2:
        return np.array([[1, 1], [1, -1]])
    if n % 4:
        return None
    if n & (n - 1) == 0:
        return np.kron(np.array([[1, 1], [1, -1]]), _hadamard(n // 2))
    if _is_prime(n - 1) and (n - 1) % 4 == 3:
        return _paley_one(n - 1)
    if n % 2 == 0 and _is_prime(n // 2 - 1) and (n // 2 - 1) % 4 == 1:
        return _paley_two(n // 2 - 1)
    for a in range(2, math.isqrt(n) + 1):
        if n % a:
            continue
        for left, right in ((a, n // a), (n // a, a)):
            Ha, Hb = _hadamard(left), _hadamard(right)
            if Ha is not None and Hb is not None:
                return np.kron(Ha, Hb)
    return None


def hadamard(n: int) -> np.ndarray:
    """Normalised ``n x n`` Hadamard matrix (first row and column all ones).

    Built from Sylvester doubling, Paley constructions over prime fields and
    Kronecker products of those.  Raises :class:`UnsupportedHadamardOrder`
    for orders none of these reach (including every order that is neither
    1, 2 nor a multiple of 4).
    """
    H = _hadamard(n) if n >= 1 else None
    if H is None:
        raise UnsupportedHadamardOrder(f"no Hadamard construction for order {n}")
    H = _normalize(H)
    H.setflags(write=False)
    return H


def hadamard_supported(n: int) -> bool:
    return n >= 1 and _hadamard(n) is not None


def truncated_hadamard(n: int) -> np.ndarray:
    """Normalised Hadamard matrix of order ``n`` without its all-one first row."""
    if n < 2:
        raise ValueError(f"order must be at least 2, got {n}")
    return hadamard(n)[1:].astype(float)


# --- cancellers ------------------------------------------------------------

def fourier_canceller(p: SteeringParams) -> PhaseMatrix:
    """``S_F = F R``: nulls ``v(theta)``, rank ``N-1``, ``S S^H = N I``."""
    n = p.n_antennas
    S = truncated_fourier(n) @ phase_compensation(p)
    return PhaseMatrix(S, "fourier", CostReport(phase_shifters=n * (n - 1), adders=n - 1))


def hadamard_canceller(p: SteeringParams) -> PhaseMatrix:
    """``S_H = H R`` with the truncated Hadamard matrix; same contract as Fourier."""
    n = p.n_antennas
    S = truncated_hadamard(n) @ phase_compensation(p)
    return PhaseMatrix(S, "hadamard", CostReport(phase_shifters=n - 1, adders=n - 1))
