"""Steering vectors, SWIPT/IT channels and the received-signal model.

The received vector is ``y = G x + sum_i a_i v(theta_i) s_i + n`` where
``v(theta)`` is the uniform-linear-array phase response with adjacent-antenna
phase step ``theta``.  Angles are always handled as phase steps; physical
angles of arrival only enter through :func:`from_geometry`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DISTINCT_THETA_TOL = 1e-9


class DuplicateAngleError(ValueError):
    """Two interferers share (numerically) the same phase step."""


@dataclass(frozen=True)
class SteeringParams:
    theta: float
    n_antennas: int

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ValueError(f"need at least 2 antennas, got {self.n_antennas}")


def steering_vector(p: SteeringParams) -> np.ndarray:
    """``[1, e^{j theta}, ..., e^{j (N-1) theta}]``."""
    k = np.arange(p.n_antennas)
    return np.exp(1j * k * p.theta)


def steering_matrix(thetas: Sequence[float], n_antennas: int) -> np.ndarray:
    """Stack steering vectors as the columns of an ``N x K`` matrix."""
    k = np.arange(n_antennas)[:, None]
    return np.exp(1j * k * np.asarray(thetas, dtype=float)[None, :])


def from_geometry(aoa_rad: float, spacing: float, wavelength: float) -> float:
    """Adjacent-antenna phase step ``2 pi d / lambda * cos(aoa)``."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return 2.0 * math.pi * spacing / wavelength * math.cos(aoa_rad)


def wrapped_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle."""
    d = (a - b) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


def check_distinct(thetas: Sequence[float], tol: float = DISTINCT_THETA_TOL) -> None:
    """Raise :class:`DuplicateAngleError` if two phase steps coincide mod 2 pi."""
    thetas = list(thetas)
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            if wrapped_distance(thetas[i], thetas[j]) <= tol:
                raise DuplicateAngleError(
                    f"interferers {i} and {j} share phase step "
                    f"{thetas[i]!r} ~ {thetas[j]!r}; angles must be distinct"
                )


@dataclass(frozen=True)
class SwiptChannel:
    gain: complex
    steering: SteeringParams

    def vector(self) -> np.ndarray:
        return self.gain * steering_vector(self.steering)


def gain_from_ratio_db(ratio_db: float, it_power: float = 1.0, k: int = 1) -> float:
    """Per-interferer amplitude such that total SWIPT/IT received power is ``ratio_db``.

    Powers are per receive antenna; the ``k`` interferers share the total
    equally.
    """
    return math.sqrt(it_power * 10.0 ** (ratio_db / 10.0) / k)


def gain_from_swipt_snr_db(swipt_snr_db: float, noise_var: float) -> float:
    """Per-interferer amplitude giving per-antenna SWIPT SNR ``swipt_snr_db``."""
    return math.sqrt(noise_var * 10.0 ** (swipt_snr_db / 10.0))


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_id)``.

    Backed by the counter-based Philox generator; distinct stream ids give
    independent streams, so trials can be run in any order.
    """

    master_seed: int
    stream_id: int | tuple = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self._key)
        object.__setattr__(self, "_gen", np.random.Generator(np.random.Philox(ss)))

    @property
    def _key(self) -> tuple:
        if isinstance(self.stream_id, tuple):
            return self.stream_id
        return (self.stream_id,)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, stream_id: int) -> "RngStream":
        """A sub-stream; ``child(i)`` of the same parent is always identical."""
        return RngStream(self.master_seed, self._key + (stream_id,))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def complex_gaussian(rng, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples."""
    g = _generator(rng)
    scale = math.sqrt(variance / 2.0)
    return scale * (g.standard_normal(shape) + 1j * g.standard_normal(shape))


def sample_it_channel(n_r: int, n_t: int, rng) -> np.ndarray:
    """i.i.d. Rayleigh ``n_r x n_t`` IT channel with unit-variance entries."""
    if n_r < 1 or n_t < 1:
        raise ValueError(f"channel dimensions must be positive, got {n_r}x{n_t}")
    return complex_gaussian(rng, (n_r, n_t))


def compose_received(
    G,
    x,
    swipt: Sequence[SwiptChannel],
    s: Sequence,
    noise_var: float,
    rng=None,
) -> np.ndarray:
    """Received antenna samples ``G x + sum_i h_i s_i + n``.

    ``x`` is either one transmit vector (length ``N_t``) or a block of them
    as the columns of an ``N_t x L`` array; each ``s[i]`` is then a scalar or
    a length-``L`` sequence of symbols for interferer ``i``.
    """
    G = np.asarray(G, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim not in (1, 2) or G.ndim != 2 or G.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: G {G.shape}, x {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x has non-finite entries")
    if len(swipt) != len(s):
        raise ValueError(f"{len(swipt)} SWIPT channels but {len(s)} symbols")
    if noise_var < 0:
        raise ValueError(f"noise variance must be non-negative, got {noise_var}")
    y = G @ x
    for ch, sym in zip(swipt, s):
        if ch.steering.n_antennas != G.shape[0]:
            raise ValueError(
                f"SWIPT channel has {ch.steering.n_antennas} antennas, G has {G.shape[0]} rows"
            )
        sym = np.asarray(sym, dtype=np.complex128)
        if sym.ndim != x.ndim - 1 or (sym.ndim == 1 and sym.size != x.shape[1]):
            raise ValueError(f"SWIPT symbols of shape {sym.shape} do not match x {x.shape}")
        y = y + np.multiply.outer(ch.vector(), sym)
    if noise_var > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_var > 0")
        y = y + complex_gaussian(rng, y.shape, noise_var)
    return y
