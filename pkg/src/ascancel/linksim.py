"""ADC quantization and Monte-Carlo receiver chains.

Two receivers are compared on the same block-fading link:

* digital baseline: quantize every antenna, then project out the SWIPT
  channels numerically and zero-force the IT streams;
* analog chain: apply a unit-modulus cancellation matrix before the ADCs,
  quantize its outputs, zero-force over the effective channel ``S G``; each
  SWIPT stream is recovered separately by phase-compensate-and-add.

Power bookkeeping is per receive antenna: the IT signal arrives with unit
power, the noise variance is ``10^(-it_snr_db/10)``, and the SWIPT power is
set from either the SWIPT/IT power ratio or the per-interferer SWIPT SNR.
Each block of ``block_len`` symbols draws a fresh IT channel, fresh angles
(unless fixed) and fresh SWIPT gain phases from its own RNG stream, and the
ADC full scale is the composite peak within the block.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import (
    RngStream,
    SteeringParams,
    SwiptChannel,
    check_distinct,
    compose_received,
    gain_from_ratio_db,
    gain_from_swipt_snr_db,
    sample_it_channel,
    steering_matrix,
    wrapped_distance,
    DISTINCT_THETA_TOL,
)
from .kron import PhaseProgram, construct_canceller, evaluate_program, k_max
from .numeric import null_space_basis
from .single import PhaseMatrix, fourier_canceller


# --- ADC -------------------------------------------------------------------

@dataclass(frozen=True)
class AdcModel:
    """Uniform mid-rise quantizer applied to I and Q separately.

    ``full_scale=None`` scales the range to the peak absolute component of
    whatever block is being quantized.
    """

    bits: int
    full_scale: float | None = None

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"ADC needs at least 1 bit, got {self.bits}")
        if self.full_scale is not None and self.full_scale <= 0:
            raise ValueError(f"full scale must be positive, got {self.full_scale}")


def _quantize_real(x: np.ndarray, bits: int, fs: float) -> np.ndarray:
    levels = 2**bits
    step = 2.0 * fs / levels
    idx = np.clip(np.floor(x / step), -levels // 2, levels // 2 - 1)
    return (idx + 0.5) * step


def quantize(v, adc: AdcModel) -> np.ndarray:
    """Quantize a complex array (any shape) with ``2^bits`` levels per rail."""
    v = np.asarray(v, dtype=np.complex128)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite samples")
    fs = adc.full_scale
    if fs is None:
        fs = float(max(np.max(np.abs(v.real), initial=0.0), np.max(np.abs(v.imag), initial=0.0)))
        if fs == 0.0:
            return np.zeros_like(v)
    return _quantize_real(v.real, adc.bits, fs) + 1j * _quantize_real(v.imag, adc.bits, fs)


def sqnr_estimate_db(bits: int, c_db: float = 0.0, ratio_db: float = 0.0) -> float:
    """Rule-of-thumb weak-signal SQNR: ``6.02 b + c - R`` in dB."""
    if bits < 1:
        raise ValueError(f"ADC needs at least 1 bit, got {bits}")
    return 6.02 * bits + c_db - ratio_db


# --- modulation ------------------------------------------------------------

@dataclass(frozen=True)
class ModulationScheme:
    """Square Gray-mapped M-QAM with unit average symbol energy."""

    order: int = 4

    def __post_init__(self):
        if self.order not in (4, 16, 64):
            raise ValueError(f"unsupported QAM order {self.order}; use 4, 16 or 64")

    @property
    def side(self) -> int:
        return math.isqrt(self.order)

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    @property
    def scale(self) -> float:
        return math.sqrt(2.0 * (self.order - 1) / 3.0)

    def _levels(self) -> np.ndarray:
        # Gray code g -> amplitude level; level index i carries gray label i ^ (i >> 1)
        side = self.side
        pam = 2.0 * np.arange(side) - (side - 1)
        gray = np.arange(side) ^ (np.arange(side) >> 1)
        levels = np.empty(side)
        levels[gray] = pam
        return levels

    def modulate(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices)
        half = self.bits_per_symbol // 2
        levels = self._levels()
        i_lab = indices >> half
        q_lab = indices & ((1 << half) - 1)
        return (levels[i_lab] + 1j * levels[q_lab]) / self.scale

    def demodulate(self, symbols: np.ndarray) -> np.ndarray:
        symbols = np.asarray(symbols) * self.scale
        side = self.side
        half = self.bits_per_symbol // 2

        def axis(x):
            i = np.clip(np.round((x + (side - 1)) / 2.0), 0, side - 1).astype(np.int64)
            return i ^ (i >> 1)

        return (axis(symbols.real) << half) | axis(symbols.imag)

    def random_indices(self, rng, shape) -> np.ndarray:
        gen = rng.generator if isinstance(rng, RngStream) else rng
        return gen.integers(0, self.order, size=shape)


def effective_throughput(ser: float, m: int) -> float:
    """Bits per symbol delivered: ``(1 - SER) log2 M``."""
    if not 0.0 <= ser <= 1.0:
        raise ValueError(f"SER must lie in [0, 1], got {ser}")
    return (1.0 - ser) * math.log2(m)


# --- configuration & results ----------------------------------------------

@dataclass(frozen=True)
class LinkConfig:
    n_r: int = 4
    n_t: int = 4
    k: int = 1
    it_streams: int = 2
    it_snr_db: float = 10.0
    ratio_db: float | None = None
    swipt_snr_db: float | None = None
    adc_bits: int | None = 6
    modulation: int = 4
    swipt_modulation: int = 4
    sqnr_c_db: float = 0.0
    sigma_e: float = 0.0
    block_len: int = 1000
    thetas: tuple[float, ...] | None = None
    noise: bool = True
    search_method: str = "greedy"

    def __post_init__(self):
        if self.n_r < 2 or self.n_t < 1:
            raise ValueError(f"need n_r >= 2 and n_t >= 1, got {self.n_r}, {self.n_t}")
        if self.k < 1:
            raise ValueError(f"need at least one SWIPT interferer, got k={self.k}")
        if self.k > k_max(self.n_r):
            raise ValueError(
                f"k={self.k} exceeds K_max({self.n_r}) = {k_max(self.n_r)} "
                "(sum of the prime exponents of n_r)"
            )
        if not 1 <= self.it_streams <= min(self.n_t, self.n_r - self.k):
            raise ValueError(
                f"it_streams={self.it_streams} must lie in 1..min(n_t, n_r - k) = "
                f"{min(self.n_t, self.n_r - self.k)}"
            )
        if (self.ratio_db is None) == (self.swipt_snr_db is None):
            raise ValueError("set exactly one of ratio_db and swipt_snr_db")
        if self.adc_bits is not None and self.adc_bits < 1:
            raise ValueError(f"adc_bits must be >= 1, got {self.adc_bits}")
        ModulationScheme(self.modulation)
        ModulationScheme(self.swipt_modulation)
        if self.sigma_e < 0:
            raise ValueError(f"sigma_e must be non-negative, got {self.sigma_e}")
        if self.block_len < 1:
            raise ValueError(f"block_len must be positive, got {self.block_len}")
        if self.thetas is not None:
            thetas = tuple(float(t) for t in self.thetas)
            if len(thetas) != self.k:
                raise ValueError(f"{len(thetas)} angles given for k={self.k}")
            check_distinct(thetas)
            object.__setattr__(self, "thetas", thetas)

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.it_snr_db / 10.0)

    @property
    def swipt_amplitude(self) -> float:
        if self.ratio_db is not None:
            return gain_from_ratio_db(self.ratio_db, 1.0, self.k)
        return gain_from_swipt_snr_db(self.swipt_snr_db, self.noise_var)

    @property
    def effective_ratio_db(self) -> float:
        """Total SWIPT/IT received power ratio in dB."""
        return 10.0 * math.log10(self.k * self.swipt_amplitude**2)

    @property
    def adc(self) -> AdcModel | None:
        return None if self.adc_bits is None else AdcModel(self.adc_bits)


@dataclass(frozen=True)
class TrialStats:
    ser_it: float
    ser_swipt: float
    symbols_run: int
    modulation: int = 4
    it_errors: int = field(default=0, compare=False)
    swipt_errors: int = field(default=0, compare=False)

    @property
    def throughput(self) -> float:
        return effective_throughput(self.ser_it, self.modulation)


# --- shared link machinery -------------------------------------------------

def draw_thetas(k: int, rng, tol: float = DISTINCT_THETA_TOL) -> np.ndarray:
    """``k`` phase steps uniform on ``[0, 2 pi)``, redrawn until pairwise distinct."""
    gen = rng.generator if isinstance(rng, RngStream) else rng
    while True:
        t = gen.uniform(0.0, 2.0 * math.pi, size=k)
        if all(
            wrapped_distance(t[i], t[j]) > tol for i in range(k) for j in range(i + 1, k)
        ):
            return t


def perturb_thetas(thetas: Sequence[float], sigma_e: float, rng) -> np.ndarray:
    """Add independent ``N(0, sigma_e^2)`` errors to each phase step."""
    if sigma_e < 0:
        raise ValueError(f"sigma_e must be non-negative, got {sigma_e}")
    thetas = np.asarray(thetas, dtype=float)
    if sigma_e == 0:
        return thetas.copy()
    gen = rng.generator if isinstance(rng, RngStream) else rng
    return thetas + sigma_e * gen.standard_normal(thetas.shape)


@dataclass
class _Block:
    G: np.ndarray  # n_r x streams, stream power folded in
    thetas: np.ndarray
    thetas_est: np.ndarray
    gains: np.ndarray  # complex SWIPT gains
    Y: np.ndarray  # n_r x L received samples
    it_idx: np.ndarray  # streams x L
    swipt_idx: np.ndarray  # k x L


def _draw_block(cfg: LinkConfig, rng: RngStream, length: int) -> _Block:
    it_mod = ModulationScheme(cfg.modulation)
    sw_mod = ModulationScheme(cfg.swipt_modulation)
    gen = rng.generator
    G_full = sample_it_channel(cfg.n_r, cfg.n_t, rng)
    thetas = np.array(cfg.thetas) if cfg.thetas is not None else draw_thetas(cfg.k, rng)
    thetas_est = perturb_thetas(thetas, cfg.sigma_e, rng)
    amp = cfg.swipt_amplitude
    gains = amp * np.exp(2j * math.pi * gen.uniform(size=cfg.k))
    it_idx = it_mod.random_indices(gen, (cfg.it_streams, length))
    sw_idx = sw_mod.random_indices(gen, (cfg.k, length))
    X = np.zeros((cfg.n_t, length), dtype=np.complex128)
    X[: cfg.it_streams] = it_mod.modulate(it_idx) / math.sqrt(cfg.it_streams)
    swipt = [SwiptChannel(g, SteeringParams(t, cfg.n_r)) for g, t in zip(gains, thetas)]
    noise_var = cfg.noise_var if cfg.noise else 0.0
    Y = compose_received(G_full, X, swipt, list(sw_mod.modulate(sw_idx)), noise_var, rng)
    G = G_full[:, : cfg.it_streams] / math.sqrt(cfg.it_streams)
    return _Block(G, thetas, thetas_est, gains, Y, it_idx, sw_idx)


def _blocks(cfg: LinkConfig, n_symbols: int, rng: RngStream):
    n_blocks = max(1, math.ceil(n_symbols / cfg.block_len))
    remaining = n_symbols
    for b in range(n_blocks):
        length = min(cfg.block_len, remaining)
        remaining -= length
        yield _draw_block(cfg, rng.child(b), length)


def _zf_detect(Geff: np.ndarray, Z: np.ndarray, mod: ModulationScheme) -> np.ndarray:
    return mod.demodulate(np.linalg.pinv(Geff) @ Z)


def _maybe_quantize(Z: np.ndarray, cfg: LinkConfig) -> np.ndarray:
    adc = cfg.adc
    return Z if adc is None else quantize(Z, adc)


def _as_rng(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError("link simulations need an RngStream (or integer seed)")


# --- receivers -------------------------------------------------------------

def run_digital_baseline(cfg: LinkConfig, n_symbols: int, rng) -> TrialStats:
    """Quantize all antennas, null the SWIPT span numerically, zero-force."""
    rng = _as_rng(rng)
    mod = ModulationScheme(cfg.modulation)
    errors = total = 0
    for blk in _blocks(cfg, n_symbols, rng):
        Yq = _maybe_quantize(blk.Y, cfg)
        H = steering_matrix(blk.thetas, cfg.n_r) * blk.gains[None, :]
        U = null_space_basis(H)
        Z = U.conj().T @ Yq
        det = _zf_detect(U.conj().T @ blk.G, Z, mod)
        errors += int(np.count_nonzero(det != blk.it_idx))
        total += blk.it_idx.size
    return TrialStats(errors / total, math.nan, n_symbols, cfg.modulation, errors, 0)


def _canceller_for(cfg: LinkConfig, canceller, thetas_est: np.ndarray) -> np.ndarray:
    if canceller is None:
        if cfg.k == 1:
            return fourier_canceller(SteeringParams(float(thetas_est[0]), cfg.n_r)).matrix
        return construct_canceller(cfg.n_r, thetas_est, cfg.search_method).canceller.matrix
    if isinstance(canceller, PhaseProgram):
        return evaluate_program(canceller, thetas_est).matrix
    if isinstance(canceller, PhaseMatrix):
        return canceller.matrix
    return np.asarray(canceller, dtype=np.complex128)


def run_analog_chain(cfg: LinkConfig, canceller=None, n_symbols: int = 100_000, rng=0) -> TrialStats:
    """Cancel in the analog domain, then quantize and detect both signal types.

    ``canceller`` may be a fixed :class:`PhaseMatrix` (or array), a
    :class:`PhaseProgram` evaluated each block at the estimated angles, or
    ``None`` to construct one per block from the estimated angles.  The
    estimated angles equal the true ones unless ``cfg.sigma_e > 0``.
    """
    rng = _as_rng(rng)
    mod = ModulationScheme(cfg.modulation)
    sw_mod = ModulationScheme(cfg.swipt_modulation)
    rows = cfg.n_r - cfg.k
    it_err = it_tot = sw_err = sw_tot = 0
    for blk in _blocks(cfg, n_symbols, rng):
        S = _canceller_for(cfg, canceller, blk.thetas_est)
        if S.shape != (rows, cfg.n_r):
            raise ValueError(f"canceller has shape {S.shape}, expected {(rows, cfg.n_r)}")
        Zq = _maybe_quantize(S @ blk.Y, cfg)
        det = _zf_detect(S @ blk.G, Zq, mod)
        it_err += int(np.count_nonzero(det != blk.it_idx))
        it_tot += blk.it_idx.size
        # compensate-and-add per SWIPT stream, each on its own ADC
        V = steering_matrix(blk.thetas_est, cfg.n_r)
        for i in range(cfg.k):
            c = V[:, i].conj() @ blk.Y / cfg.n_r
            cq = _maybe_quantize(c, cfg)
            det_s = sw_mod.demodulate(cq / blk.gains[i])
            sw_err += int(np.count_nonzero(det_s != blk.swipt_idx[i]))
            sw_tot += det_s.size
    return TrialStats(it_err / it_tot, sw_err / sw_tot, n_symbols, cfg.modulation, it_err, sw_err)


def measure_weak_sqnr_db(bits: int, ratio_db: float, n_symbols: int, rng, n_r: int = 4) -> float:
    """Empirical SQNR of the IT component after quantizing the raw antennas.

    Uses the digital-baseline front end with one interferer and no thermal
    noise; quantization error is measured against the unquantized composite.
    """
    rng = _as_rng(rng)
    cfg = LinkConfig(n_r=n_r, n_t=n_r, k=1, it_streams=2, ratio_db=ratio_db, adc_bits=bits, noise=False)
    it_mod = ModulationScheme(cfg.modulation)
    sig = err = 0.0
    for blk in _blocks(cfg, n_symbols, rng):
        weak = blk.G @ it_mod.modulate(blk.it_idx)
        q = quantize(blk.Y, AdcModel(bits))
        sig += float(np.sum(np.abs(weak) ** 2))
        err += float(np.sum(np.abs(q - blk.Y) ** 2))
    return 10.0 * math.log10(sig / err)


def residual_interference_power(n_r: int, theta: float, sigma_e: float, trials: int, rng) -> float:
    """Mean ``||S(theta + delta) v(theta)||^2`` for the Fourier canceller."""
    rng = _as_rng(rng)
    v = np.exp(1j * np.arange(n_r) * theta)
    acc = 0.0
    for t in range(trials):
        est = perturb_thetas([theta], sigma_e, rng.child(t))[0]
        S = fourier_canceller(SteeringParams(float(est), n_r)).matrix
        acc += float(np.sum(np.abs(S @ v) ** 2))
    return acc / trials


# --- condition-number study ---------------------------------------------

@dataclass(frozen=True)
class StudyResult:
    n_r: int
    k: int
    method: str
    conds: np.ndarray
    iterations: np.ndarray

    @property
    def finite_fraction(self) -> float:
        return float(np.mean(np.isfinite(self.conds)))

    def fraction_below(self, x: float) -> float:
        return float(np.mean(self.conds < x))

    def histogram(self, edges: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Empirical probability per bin; the last bin is open-ended."""
        edges = np.asarray(list(edges) + [np.inf], dtype=float)
        counts, _ = np.histogram(self.conds[np.isfinite(self.conds)], bins=edges)
        return counts / len(self.conds), edges


def condition_number_study(n_r: int, k: int, method: str, n_realizations: int, rng) -> StudyResult:
    """Construct-and-select over uniformly drawn angles; record condition numbers."""
    rng = _as_rng(rng)
    conds = np.empty(n_realizations)
    iters = np.empty(n_realizations, dtype=np.int64)
    for r in range(n_realizations):
        sub = rng.child(r)
        thetas = draw_thetas(k, sub)
        c = construct_canceller(n_r, thetas, method, rng=sub)
        conds[r] = c.metrics.condition_number
        iters[r] = c.selection.iterations
    return StudyResult(n_r, k, method, conds, iters)


# --- CSV output ------------------------------------------------------------

CSV_COLUMNS = ("experiment", "sweep_name", "sweep_value", "metric", "value", "n_symbols_or_reals", "seed")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    sweep_name: str
    sweep_value: float | str
    metric: str
    value: float
    n_symbols_or_reals: int
    seed: int

    def as_list(self) -> list:
        return [
            self.experiment,
            self.sweep_name,
            _fmt(self.sweep_value),
            self.metric,
            _fmt(self.value),
            self.n_symbols_or_reals,
            self.seed,
        ]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_rows(path, rows: Iterable[ResultRow], append: bool = True) -> None:
    """Write result rows; a header is emitted only when the file is new or empty."""
    exists = os.path.exists(path) and os.path.getsize(path) > 0
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if not (append and exists):
            w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(row.as_list())
