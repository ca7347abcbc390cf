"""Kronecker-structured unit-modulus cancellers for several interferers.

A steering vector of length ``N = n_1 n_2 ... n_K`` factors as a left
Kronecker chain of ``K`` shorter steering vectors with growing phase
strides.  A cancellation vector built as a Kronecker chain of the same shape
is orthogonal to every interferer as soon as each interferer is nulled by
one of its components, and a single-interferer Fourier row does that for a
component.  Enumerating every component-to-interferer order and every
Fourier row gives the mother set; ``N - K`` independent members of it form
the cancellation matrix.

Cancellation orders are tuples of 0-based interferer indices: ``order[i]``
is the interferer nulled by component slot ``i``.  Fourier rows are 1-based
(``1 <= l <= n_i - 1``) since row 0 is the all-one row.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .channel import SteeringParams, check_distinct, steering_matrix
from .numeric import (
    DEFAULT_RANK_TOL,
    SpectralMetrics,
    batch_condition_numbers,
    kron_left_chain,
    spectral_metrics,
)
from .single import PhaseMatrix

TWO_PI = 2.0 * math.pi


class InvalidPlanError(ValueError):
    """A factorization plan does not match the array or interferer count."""


class SelectionError(RuntimeError):
    """No independent subset of the mother set could be found."""


# --- factorization -------------------------------------------------------

def prime_factorize(n: int) -> list[tuple[int, int]]:
    """Canonical ``[(prime, exponent), ...]`` with primes ascending."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def k_max(n_r: int) -> int:
    """Most interferers a Kronecker construction on ``n_r`` antennas can null."""
    return sum(e for _, e in prime_factorize(n_r))


@dataclass(frozen=True)
class FactorizationPlan:
    factors: tuple[int, ...]

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if not factors or any(f < 2 for f in factors):
            raise InvalidPlanError(f"factors must all be >= 2, got {self.factors}")
        object.__setattr__(self, "factors", factors)

    @property
    def n_r(self) -> int:
        return math.prod(self.factors)

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def n_orth(self) -> int:
        return math.prod(f - 1 for f in self.factors)

    @property
    def n_sub(self) -> int:
        return math.factorial(self.k)

    @property
    def mother_set_size(self) -> int:
        return self.n_sub * self.n_orth

    @property
    def strides(self) -> tuple[int, ...]:
        """Phase stride of each component: product of the preceding factors."""
        out, acc = [], 1
        for f in self.factors:
            out.append(acc)
            acc *= f
        return tuple(out)


def _check_k(n_r: int, k: int) -> None:
    km = k_max(n_r)
    if not 1 <= k <= km:
        raise InvalidPlanError(
            f"{k} interferers cannot be nulled with {n_r} antennas: "
            f"the Kronecker construction supports 1 <= K <= K_max = {km}"
        )


def merge_smallest_factorization(n_r: int, k: int) -> FactorizationPlan:
    """Merge the two smallest prime factors repeatedly until ``k`` remain.

    A fast heuristic that is usually optimal but not always: for
    ``(36, 2)`` it gives ``(4, 9)`` while ``(6, 6)`` is better.  Factors are
    returned in ascending order.
    """
    _check_k(n_r, k)
    factors = sorted(p for p, e in prime_factorize(n_r) for _ in range(e))
    while len(factors) > k:
        a, b = factors[0], factors[1]
        factors = sorted(factors[2:] + [a * b])
    return FactorizationPlan(tuple(factors))


def _sorted_factorizations(n: int, k: int, lo: int = 2) -> Iterable[tuple[int, ...]]:
    # non-decreasing k-tuples of integers >= lo with product n
    if k == 1:
        if n >= lo:
            yield (n,)
        return
    d = lo
    while d**k <= n:
        if n % d == 0:
            for rest in _sorted_factorizations(n // d, k - 1, d):
                yield (d,) + rest
        d += 1


def optimal_factorization(n_r: int, k: int) -> FactorizationPlan:
    """Factor ``n_r`` into ``k`` factors maximising ``prod(n_i - 1)``.

    Searches every unordered factorization; ties go to the most even one
    (largest smallest factor).  Factors are returned in ascending order.
    """
    _check_k(n_r, k)
    best = max(
        _sorted_factorizations(n_r, k),
        key=lambda f: (math.prod(x - 1 for x in f), f[0]),
    )
    return FactorizationPlan(best)


def ordered_factorizations(n: int, k: int) -> Iterable[tuple[int, ...]]:
    """Every ordered tuple of ``k`` integers ``>= 2`` whose product is ``n``."""
    if k == 1:
        if n >= 2:
            yield (n,)
        return
    for d in range(2, n + 1):
        if n % d == 0:
            for rest in ordered_factorizations(n // d, k - 1):
                yield (d,) + rest


def best_factorization_exhaustive(n_r: int, k: int) -> tuple[int, list[tuple[int, ...]]]:
    """Brute-force optimum of ``prod(n_i - 1)`` and every plan attaining it."""
    _check_k(n_r, k)
    best, arg = -1, []
    for f in ordered_factorizations(n_r, k):
        val = math.prod(x - 1 for x in f)
        if val > best:
            best, arg = val, [f]
        elif val == best:
            arg.append(f)
    return best, arg


def resolve_plan(n_r: int, k: int, plan: FactorizationPlan | Sequence[int] | None = None) -> FactorizationPlan:
    if plan is None:
        return optimal_factorization(n_r, k)
    if not isinstance(plan, FactorizationPlan):
        plan = FactorizationPlan(tuple(plan))
    if plan.n_r != n_r:
        raise InvalidPlanError(f"plan {plan.factors} has product {plan.n_r}, expected {n_r}")
    if plan.k != k:
        raise InvalidPlanError(f"plan {plan.factors} has {plan.k} factors, expected {k}")
    return plan


# --- construction --------------------------------------------------------

def kron_decompose(p: SteeringParams, plan: FactorizationPlan) -> list[np.ndarray]:
    """Components of ``v(theta)`` whose left Kronecker chain is ``v(theta)``.

    Component ``j`` has length ``n_j`` and entries ``e^{j q s_j theta}`` with
    stride ``s_j = n_1 ... n_{j-1}``.
    """
    if plan.n_r != p.n_antennas:
        raise InvalidPlanError(
            f"plan {plan.factors} has product {plan.n_r}, array has {p.n_antennas} antennas"
        )
    return [
        np.exp(1j * np.arange(n) * stride * p.theta)
        for n, stride in zip(plan.factors, plan.strides)
    ]


def fourier_row(n: int, row_l: int) -> np.ndarray:
    """Row ``l`` of the ``n``-point DFT, ``e^{+j 2 pi l k / n}``."""
    k = np.arange(n)
    return np.exp(2j * np.pi * ((row_l * k) % n) / n)


def build_component(theta_target: float, n_i: int, stride: int, row_l: int) -> np.ndarray:
    """Fourier row ``l`` de-rotated by the targeted component's phases.

    The result is orthogonal (under the plain transpose product) to
    ``[1, e^{j s theta}, ..., e^{j (n-1) s theta}]``.
    """
    if not 1 <= row_l <= n_i - 1:
        raise ValueError(f"row must lie in 1..{n_i - 1}, got {row_l}")
    k = np.arange(n_i)
    return fourier_row(n_i, row_l) * np.exp(-1j * k * stride * theta_target)


def _check_order(order: Sequence[int], k: int) -> tuple[int, ...]:
    order = tuple(int(o) for o in order)
    if sorted(order) != list(range(k)):
        raise ValueError(f"cancellation order must be a permutation of 0..{k - 1}, got {order}")
    return order


def build_vector(
    plan: FactorizationPlan,
    order: Sequence[int],
    rows: Sequence[int],
    thetas: Sequence[float],
) -> np.ndarray:
    """One cancellation vector nulling every ``v(thetas[j])``."""
    order = _check_order(order, plan.k)
    if len(rows) != plan.k or len(thetas) != plan.k:
        raise InvalidPlanError(
            f"plan has {plan.k} components but got {len(rows)} rows and {len(thetas)} angles"
        )
    comps = [
        build_component(thetas[order[i]], n, stride, rows[i])
        for i, (n, stride) in enumerate(zip(plan.factors, plan.strides))
    ]
    return kron_left_chain(comps)


@dataclass(frozen=True)
class VectorMeta:
    order: tuple[int, ...]
    rows: tuple[int, ...]


@dataclass(frozen=True)
class MotherSet:
    """All candidate cancellation vectors for one plan and set of angles."""

    plan: FactorizationPlan
    thetas: tuple[float, ...]
    vectors: np.ndarray  # (n_vectors, n_r)
    meta: tuple[VectorMeta, ...]

    @property
    def n_orth(self) -> int:
        return self.plan.n_orth

    @property
    def n_sub(self) -> int:
        return self.plan.n_sub

    def __len__(self) -> int:
        return len(self.meta)

    def subset_indices(self, order: Sequence[int]) -> list[int]:
        """Indices of the vectors built with one cancellation order."""
        order = tuple(order)
        return [i for i, m in enumerate(self.meta) if m.order == order]


def mother_set_meta(plan: FactorizationPlan) -> list[VectorMeta]:
    """Lexicographic (order, row tuple) enumeration shared by every angle set."""
    row_ranges = [range(1, n) for n in plan.factors]
    return [
        VectorMeta(order, rows)
        for order in itertools.permutations(range(plan.k))
        for rows in itertools.product(*row_ranges)
    ]


def generate_mother_set(plan: FactorizationPlan, thetas: Sequence[float]) -> MotherSet:
    thetas = tuple(float(t) for t in thetas)
    if len(thetas) != plan.k:
        raise InvalidPlanError(f"plan has {plan.k} components but got {len(thetas)} angles")
    check_distinct(thetas)
    meta = mother_set_meta(plan)
    vectors = np.array([build_vector(plan, m.order, m.rows, thetas) for m in meta])
    return MotherSet(plan, thetas, vectors, tuple(meta))


# --- independent subset selection ---------------------------------------

@dataclass(frozen=True)
class Selection:
    indices: tuple[int, ...]
    metrics: SpectralMetrics
    iterations: int
    method: str


# brute force is used for exhaust search up to this many subsets; above it a
# branch-and-bound over the same lexicographic order finds the same optimum
EXHAUST_BRUTE_LIMIT = 20_000
_BATCH = 4096


def _exhaust_brute(vectors: np.ndarray, m: int, tol: float) -> tuple[tuple[int, ...], float]:
    best_cond, best_idx = math.inf, None
    combos = itertools.combinations(range(len(vectors)), m)
    while True:
        chunk = list(itertools.islice(combos, _BATCH))
        if not chunk:
            break
        idx = np.array(chunk)
        conds = batch_condition_numbers(vectors[idx], tol)
        j = int(np.argmin(conds))  # first minimum = lexicographically smallest
        if conds[j] < best_cond:
            best_cond, best_idx = float(conds[j]), tuple(chunk[j])
    return best_idx, best_cond


def _cond(mat: np.ndarray, tol: float) -> float:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[-1] <= tol * sv[0]:
        return math.inf
    return float(sv[0] / sv[-1])


def _subset_bounds(coords: np.ndarray, subsets: np.ndarray, m: int, tol: float):
    """Condition numbers of partial picks and a lower bound on any completion.

    ``coords`` holds every candidate in an orthonormal basis of the common
    m-dimensional row space; ``subsets`` is ``(c, a)`` sorted index rows.
    A partial pick ``A`` with ``r = m - a`` rows still to come is bounded by
    (i) ``cond(A)``: adding rows never lowers sigma_max nor raises sigma_min;
    (ii) for unit ``u`` with ``A u = 0`` the finished matrix has
    ``sigma_min^2 <= ||B u||^2 <=`` the ``r`` largest ``|p u|^2`` over the
    remaining pool, and with ``w`` the top right singular vector of ``A``,
    ``sigma_max^2 >= sigma_max(A)^2 +`` the ``r`` smallest ``|p w|^2``.
    """
    n = len(coords)
    c, a = subsets.shape
    # A^H = Q R: the trailing columns of Q span null(A), and the singular
    # values of A are those of R
    q, rr = np.linalg.qr(np.conj(np.swapaxes(coords[subsets], 1, 2)), mode="complete")
    rr = rr[:, :a, :]
    lam, y = np.linalg.eigh(rr @ np.conj(np.swapaxes(rr, 1, 2)))
    lam = np.clip(lam, 0.0, None)
    s_max, s_min = np.sqrt(lam[:, -1]), np.sqrt(lam[:, 0])
    full = s_min > tol * s_max
    with np.errstate(divide="ignore", invalid="ignore"):
        conds = np.where(full, s_max / np.where(full, s_min, 1.0), np.inf)
    r = m - a
    if r == 0:
        return conds, conds
    pool = np.arange(n)[None, :] > subsets[:, -1:]
    null = np.swapaxes(q[:, :, a:], 1, 2)  # rows u with A u = 0
    # besides the basis of null(A), try the direction with least pool energy
    pc = np.einsum("nm,crm->crn", coords, null) * pool[:, None, :]
    _, evec = np.linalg.eigh(np.einsum("crn,csn->crs", pc.conj(), pc))
    u_star = np.einsum("cr,crm->cm", evec[:, :, 0], null)
    dirs = np.concatenate([null, u_star[:, None, :]], axis=1)
    proj = np.abs(np.einsum("nm,crm->crn", coords, dirs)) ** 2
    proj = np.where(pool[:, None, :], proj, 0.0)
    smin_ub = (-np.sort(-proj, axis=2)[:, :, :r]).sum(axis=2).min(axis=1)
    w = np.einsum("cma,ca->cm", q[:, :, :a], y[:, :, -1])  # top right singular vector
    pw = np.abs(coords @ w.T).T ** 2
    pw = np.where(pool, pw, np.inf)
    smax_lb = s_max**2 + np.sort(pw, axis=1)[:, :r].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(smin_ub > 0, np.sqrt(smax_lb / np.where(smin_ub > 0, smin_ub, 1.0)), np.inf)
    return conds, np.maximum(conds, bound)


def _exhaust_branch_and_bound(
    vectors: np.ndarray, m: int, tol: float, incumbent: tuple[tuple[int, ...], float]
) -> tuple[tuple[int, ...], float]:
    # Level-by-level expansion of the lexicographic subset tree; a node
    # survives only while its lower bound does not exceed the incumbent.
    _, _, vh = np.linalg.svd(vectors, full_matrices=False)
    coords = vectors @ vh[:m].conj().T
    n = len(coords)
    best_idx, best_cond = incumbent
    frontier = np.zeros((1, 0), dtype=np.int64)
    for a in range(1, m + 1):
        last = frontier[:, -1] if a > 1 else np.full(len(frontier), -1)
        hi = n - (m - a)  # exclusive upper bound on the new index
        parts = []
        for node, lo in zip(frontier, last + 1):
            kids = np.arange(lo, hi)
            if kids.size:
                parts.append(np.hstack([np.broadcast_to(node, (kids.size, a - 1)), kids[:, None]]))
        if not parts:
            break
        children = np.vstack(parts)
        keep_rows, keep_cond = [], []
        for start in range(0, len(children), _BATCH):
            chunk = children[start : start + _BATCH]
            conds, bound = _subset_bounds(coords, chunk, m, tol)
            ok = bound <= best_cond
            keep_rows.append(chunk[ok])
            keep_cond.append(conds[ok])
        frontier = np.vstack(keep_rows)
        if a == m and len(frontier):
            conds = np.concatenate(keep_cond)
            j = int(np.argmin(conds))  # children are in lexicographic order
            cand = tuple(int(x) for x in frontier[j])
            if conds[j] < best_cond or (conds[j] == best_cond and cand < best_idx):
                best_idx, best_cond = cand, float(conds[j])
        if not len(frontier):
            break
    return best_idx, best_cond


def _greedy(vectors: np.ndarray, m: int, tol: float) -> tuple[list[int], int]:
    chosen = [0]
    evaluations = 0
    while len(chosen) < m:
        remaining = [i for i in range(len(vectors)) if i not in chosen]
        stack = np.array([vectors[chosen + [i]] for i in remaining])
        conds = batch_condition_numbers(stack, tol)
        evaluations += len(remaining)
        j = int(np.argmin(conds))
        if not math.isfinite(conds[j]):
            raise SelectionError(
                f"greedy search stalled at {len(chosen)} of {m} vectors: "
                "every extension is rank deficient"
            )
        chosen.append(remaining[j])
    return sorted(chosen), evaluations


def _random(vectors: np.ndarray, m: int, tol: float, rng, budget: int) -> tuple[list[int], int]:
    gen = rng.generator if hasattr(rng, "generator") else rng
    for it in range(1, budget + 1):
        idx = np.sort(gen.choice(len(vectors), size=m, replace=False))
        if math.isfinite(_cond(vectors[idx], tol)):
            return idx.tolist(), it
    raise SelectionError(
        f"no independent subset found in {budget} random draws; "
        "the angle configuration is probably degenerate"
    )


def select_independent(
    ms: MotherSet,
    count_needed: int | None = None,
    method: str = "greedy",
    rng=None,
    tol: float = DEFAULT_RANK_TOL,
    budget: int = 10_000,
) -> Selection:
    """Pick ``count_needed`` (default ``N - K``) independent mother-set vectors.

    ``exhaust`` returns the subset with globally minimal condition number
    (ties to the lexicographically first), ``greedy`` grows the set from
    vector 0 by the smallest incremental condition number, and ``random``
    draws uniform subsets until one has full rank.

    ``iterations`` counts candidate subsets in the search space for
    ``exhaust``, condition-number evaluations for ``greedy`` and draws for
    ``random``.
    """
    n_r = ms.plan.n_r
    m = n_r - ms.plan.k if count_needed is None else count_needed
    if not 1 <= m <= len(ms):
        raise ValueError(f"cannot select {m} vectors from a mother set of {len(ms)}")
    vecs = ms.vectors
    if method == "exhaust":
        iterations = math.comb(len(ms), m)
        if iterations <= EXHAUST_BRUTE_LIMIT:
            idx, _ = _exhaust_brute(vecs, m, tol)
        else:
            g_idx, _ = _greedy(vecs, m, tol)
            idx, _ = _exhaust_branch_and_bound(vecs, m, tol, (tuple(g_idx), _cond(vecs[g_idx], tol)))
        if idx is None:
            raise SelectionError("mother set has no independent subset")
        idx = list(idx)
    elif method == "greedy":
        idx, iterations = _greedy(vecs, m, tol)
    elif method == "random":
        if rng is None:
            raise ValueError("random search needs an rng")
        idx, iterations = _random(vecs, m, tol, rng, budget)
    else:
        raise ValueError(f"unknown search method {method!r}")
    metrics = spectral_metrics(vecs[idx], tol)
    if metrics.numeric_rank != m:
        raise SelectionError(f"selected subset has rank {metrics.numeric_rank} < {m}")
    return Selection(tuple(int(i) for i in idx), metrics, iterations, method)


# --- phase programs ------------------------------------------------------

@dataclass(frozen=True)
class PhaseProgram:
    """Affine phase law per matrix entry: ``beta + gamma . thetas``.

    ``beta`` has shape ``(rows, cols)`` in radians, ``gamma`` integer shape
    ``(rows, cols, K)``.
    """

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=np.int64)
        if beta.ndim != 2 or gamma.ndim != 3 or gamma.shape[:2] != beta.shape:
            raise ValueError(f"shape mismatch: beta {beta.shape}, gamma {gamma.shape}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def shape(self) -> tuple[int, int]:
        return self.beta.shape

    @property
    def k(self) -> int:
        return self.gamma.shape[2]

    def phases(self, thetas: Sequence[float]) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        if thetas.shape != (self.k,):
            raise ValueError(f"program expects {self.k} angles, got {thetas.shape}")
        return self.beta + self.gamma @ thetas

    @staticmethod
    def stack(programs: Sequence["PhaseProgram"]) -> "PhaseProgram":
        return PhaseProgram(
            np.concatenate([p.beta for p in programs]),
            np.concatenate([p.gamma for p in programs]),
        )


def compile_phase_program(plan: FactorizationPlan, order: Sequence[int], rows: Sequence[int]) -> PhaseProgram:
    """Phase law of the single vector ``build_vector(plan, order, rows, .)``.

    Entry index ``q`` splits into mixed-radix digits ``q = k_1 + n_1 k_2 +
    n_1 n_2 k_3 + ...``; slot ``i`` contributes ``2 pi l_i k_i / n_i`` to the
    constant and ``-k_i s_i`` to the coefficient of its targeted angle.
    """
    order = _check_order(order, plan.k)
    n = plan.n_r
    beta = np.zeros(n)
    gamma = np.zeros((n, plan.k), dtype=np.int64)
    q = np.arange(n)
    for i, (n_i, stride) in enumerate(zip(plan.factors, plan.strides)):
        l = rows[i]
        if not 1 <= l <= n_i - 1:
            raise ValueError(f"row must lie in 1..{n_i - 1}, got {l}")
        digit = (q // stride) % n_i
        beta += TWO_PI * ((l * digit) % n_i) / n_i
        gamma[:, order[i]] -= digit * stride
    return PhaseProgram(np.mod(beta, TWO_PI)[None, :], gamma[None, :, :])


def compile_matrix_program(plan: FactorizationPlan, metas: Sequence[VectorMeta]) -> PhaseProgram:
    return PhaseProgram.stack([compile_phase_program(plan, m.order, m.rows) for m in metas])


def fourier_program(n_r: int) -> PhaseProgram:
    """Phase law of the single-interferer Fourier canceller."""
    l = np.arange(1, n_r)[:, None]
    k = np.arange(n_r)[None, :]
    beta = np.mod(-TWO_PI * ((l * k) % n_r) / n_r, TWO_PI)
    gamma = np.broadcast_to(-k, (n_r - 1, n_r))[:, :, None].copy()
    return PhaseProgram(beta, gamma)


def evaluate_program(program: PhaseProgram, thetas: Sequence[float]) -> PhaseMatrix:
    """Cancellation matrix ``exp(j (beta + gamma . thetas))``."""
    return PhaseMatrix(np.exp(1j * program.phases(thetas)), "kronecker")


_HEADER = "# phase-program v1"


def format_program(program: PhaseProgram) -> str:
    """Plain-text record: a header, a shape line, then one line per entry.

    Entry lines read ``row col beta gamma_1 ... gamma_K`` with ``beta`` in
    radians to 17 significant digits.
    """
    rows, cols = program.shape
    lines = [_HEADER, f"shape {rows} {cols} {program.k}"]
    for r in range(rows):
        for c in range(cols):
            g = " ".join(str(int(x)) for x in program.gamma[r, c])
            lines.append(f"{r} {c} {program.beta[r, c]:.17g} {g}")
    return "\n".join(lines) + "\n"


class ProgramFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def parse_program(text: str) -> PhaseProgram:
    """Inverse of :func:`format_program`; errors carry the offending line number."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise ProgramFormatError(1, f"expected header {_HEADER!r}")
    shape = None
    beta = gamma = seen = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if shape is None:
            if parts[0] != "shape" or len(parts) != 4:
                raise ProgramFormatError(lineno, "expected 'shape <rows> <cols> <K>'")
            try:
                shape = tuple(int(x) for x in parts[1:])
            except ValueError:
                raise ProgramFormatError(lineno, "shape values must be integers") from None
            if min(shape) < 1:
                raise ProgramFormatError(lineno, "shape values must be positive")
            rows, cols, k = shape
            beta = np.full((rows, cols), np.nan)
            gamma = np.zeros((rows, cols, k), dtype=np.int64)
            seen = np.zeros((rows, cols), dtype=bool)
            continue
        rows, cols, k = shape
        if len(parts) != 3 + k:
            raise ProgramFormatError(lineno, f"expected {3 + k} fields, got {len(parts)}")
        try:
            r, c = int(parts[0]), int(parts[1])
            b = float(parts[2])
            g = [int(x) for x in parts[3:]]
        except ValueError as exc:
            raise ProgramFormatError(lineno, str(exc)) from None
        if not (0 <= r < rows and 0 <= c < cols):
            raise ProgramFormatError(lineno, f"entry ({r}, {c}) outside shape {rows}x{cols}")
        if seen[r, c]:
            raise ProgramFormatError(lineno, f"duplicate entry ({r}, {c})")
        if not math.isfinite(b):
            raise ProgramFormatError(lineno, "beta must be finite")
        beta[r, c] = b
        gamma[r, c] = g
        seen[r, c] = True
    if shape is None:
        raise ProgramFormatError(len(lines) + 1, "missing shape line")
    if not seen.all():
        r, c = map(int, np.argwhere(~seen)[0])
        raise ProgramFormatError(len(lines) + 1, f"missing entry ({r}, {c})")
    return PhaseProgram(beta, gamma)


# --- end-to-end ----------------------------------------------------------

@dataclass(frozen=True)
class Construction:
    plan: FactorizationPlan
    mother_set: MotherSet
    selection: Selection
    program: PhaseProgram
    canceller: PhaseMatrix

    @property
    def metrics(self) -> SpectralMetrics:
        return self.selection.metrics


def construct_canceller(
    n_r: int,
    thetas: Sequence[float],
    method: str = "greedy",
    plan: FactorizationPlan | Sequence[int] | None = None,
    rng=None,
    tol: float = DEFAULT_RANK_TOL,
) -> Construction:
    """Plan, mother set, selection and phase program for ``len(thetas)`` interferers."""
    thetas = tuple(float(t) for t in thetas)
    k = len(thetas)
    plan = resolve_plan(n_r, k, plan)
    ms = generate_mother_set(plan, thetas)
    sel = select_independent(ms, n_r - k, method, rng=rng, tol=tol)
    program = compile_matrix_program(plan, [ms.meta[i] for i in sel.indices])
    return Construction(plan, ms, sel, program, evaluate_program(program, thetas))


def zf_residual(S, thetas: Sequence[float]) -> float:
    """``max |S v(theta_j)|`` over all interferers."""
    S = np.asarray(S)
    return float(np.max(np.abs(S @ steering_matrix(thetas, S.shape[1]))))


def counting_bound_checks(plan: FactorizationPlan) -> tuple[bool, bool]:
    """Exact checks of the two counting bounds for one plan.

    Returns ``(N - K <= K! prod(n_i - 1), prod(n_i - 1) <= (N^{1/K} - 1)^K)``.
    """
    n, k = plan.n_r, plan.k
    return n - k <= plan.mother_set_size, _root_bound_holds(plan.n_orth, n, k)


def _root_bound_holds(p: int, n: int, k: int) -> bool:
    # p <= (n^{1/k} - 1)^k decided in exact arithmetic
    r = round(n ** (1.0 / k))
    for cand in (r - 1, r, r + 1):
        if cand >= 1 and cand**k == n:
            return p <= (cand - 1) ** k
    # irrational root: bracket it with rationals until the comparison is decided
    lo, hi = Fraction(1), Fraction(n)
    while True:
        mid = (lo + hi) / 2
        if mid**k <= n:
            lo = mid
        else:
            hi = mid
        if p <= (lo - 1) ** k:
            return True
        if p > (hi - 1) ** k:
            return False
