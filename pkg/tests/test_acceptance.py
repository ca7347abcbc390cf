"""Acceptance checks, one per criterion, each printing a PASS/FAIL line.

Run with pytest (the lines are repeated in the terminal summary) or
directly: ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from ascancel.channel import RngStream, SteeringParams, steering_vector
from ascancel.kron import (
    FactorizationPlan,
    best_factorization_exhaustive,
    build_vector,
    counting_bound_checks,
    generate_mother_set,
    k_max,
    merge_smallest_factorization,
    optimal_factorization,
    ordered_factorizations,
    select_independent,
)
from ascancel.linksim import (
    LinkConfig,
    condition_number_study,
    measure_weak_sqnr_db,
    run_analog_chain,
    run_digital_baseline,
    sqnr_estimate_db,
)
from ascancel.numeric import spectral_metrics
from ascancel.single import fourier_canceller, hadamard_canceller

SEED = 1
RESULTS: list[str] = []


def _report(n: int, title: str, ok: bool, detail: str, elapsed: float) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail} ({elapsed:.1f} s)"
    RESULTS.append(line)
    print(line)
    return line


def _run(n, title, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    _report(n, title, ok, detail, elapsed)
    return ok, detail, elapsed


# --- criteria --------------------------------------------------------------

def criterion_1():
    gen = RngStream(SEED, 1).generator
    worst_res = worst_mod = worst_cond = 0.0
    ranks_ok = True
    count = 0
    for n in range(2, 17):
        builders = [fourier_canceller] + ([hadamard_canceller] if n in (2, 4, 8, 12, 16) else [])
        for theta in gen.uniform(0, 2 * math.pi, 100):
            p = SteeringParams(float(theta), n)
            for build in builders:
                S = build(p).matrix
                m = spectral_metrics(S)
                worst_res = max(worst_res, float(np.max(np.abs(S @ steering_vector(p)))))
                worst_mod = max(worst_mod, float(np.max(np.abs(np.abs(S) - 1))))
                worst_cond = max(worst_cond, abs(m.condition_number - 1))
                ranks_ok &= m.numeric_rank == n - 1
                count += 1
    ok = worst_res <= 1e-10 and worst_mod <= 1e-12 and worst_cond <= 1e-9 and ranks_ok
    return ok, (f"{count} matrices, max ZF residual {worst_res:.1e}, max |modulus-1| {worst_mod:.1e}, "
                f"max |cond-1| {worst_cond:.1e}, ranks ok={ranks_ok}")


def _worked_example_matrix(t1, t2):
    e = lambda x: np.exp(1j * x)
    a, b = 2 * math.pi / 3, 4 * math.pi / 3

    def row(p, q, u, w):
        # p, q: phase constants of the length-3 slot; u: slot-1 angle, w: slot-2 angle
        return [1, -e(-u), e(p - 2 * w), -e(p - 2 * w - u), e(q - 4 * w), -e(q - 4 * w - u)]

    return np.array([row(a, b, t1, t2), row(b, a, t1, t2), row(a, b, t2, t1), row(b, a, t2, t1)])


def criterion_2():
    t = (0.7, 2.1)
    plan = FactorizationPlan((2, 3))
    specs = [((0, 1), (1, 1)), ((0, 1), (1, 2)), ((1, 0), (1, 1)), ((1, 0), (1, 2))]
    S = np.array([build_vector(plan, o, r, t) for o, r in specs])
    err = float(np.max(np.abs(S - _worked_example_matrix(*t))))
    rank = spectral_metrics(S).numeric_rank
    return err <= 1e-12 and rank == 4, f"max entry error {err:.1e}, rank {rank}"


def criterion_3():
    checks = {
        "K_max(6)=2": k_max(6) == 2,
        "K_max(12)=3": k_max(12) == 3,
        "K_max(16)=4": k_max(16) == 4,
        "K_max(2^n)=n": all(k_max(2**n) == n for n in range(1, 7)),
        "|MS|(6,2)=4": len(generate_mother_set(FactorizationPlan((2, 3)), (0.7, 2.1))) == 4,
        "|MS|(12,2,3x4)=12": FactorizationPlan((3, 4)).mother_set_size == 12
        and len(generate_mother_set(FactorizationPlan((3, 4)), (0.7, 2.1))) == 12,
        "|MS|(12,2,2x6)=10": FactorizationPlan((2, 6)).mother_set_size == 10
        and len(generate_mother_set(FactorizationPlan((2, 6)), (0.7, 2.1))) == 10,
        "exhaust subsets(12,2)=66": select_independent(
            generate_mother_set(FactorizationPlan((3, 4)), (0.7, 2.1)), method="exhaust"
        ).iterations == 66,
    }
    bad = [k for k, v in checks.items() if not v]
    return not bad, "all exact" if not bad else "mismatch: " + ", ".join(bad)


def criterion_4():
    cases = mism = 0
    merge_gaps = []
    for n in range(2, 65):
        for k in range(1, k_max(n) + 1):
            best, arg = best_factorization_exhaustive(n, k)
            plan = optimal_factorization(n, k)
            cases += 1
            if plan.n_orth != best or plan.factors not in arg:
                mism += 1
            if merge_smallest_factorization(n, k).n_orth != best:
                merge_gaps.append((n, k))
    ok = mism == 0 and optimal_factorization(12, 2).factors == (3, 4)
    return ok, (f"{cases} (N_r, K) cases, optimizer mismatches {mism}, "
                f"(12,2)->{optimal_factorization(12, 2).factors}; "
                f"plain two-smallest merge rule is suboptimal at {merge_gaps}")


def criterion_5():
    plans = suff_fail = amgm_fail = eq_fail = 0
    for n in range(2, 65):
        for k in range(1, k_max(n) + 1):
            for f in ordered_factorizations(n, k):
                plan = FactorizationPlan(f)
                suff, amgm = counting_bound_checks(plan)
                plans += 1
                suff_fail += not suff
                amgm_fail += not amgm
                if len(set(f)) == 1 and plan.n_orth != (f[0] - 1) ** k:
                    eq_fail += 1
    mono_fail = []
    for n in (8, 12, 16, 24, 32, 64):
        vals = [optimal_factorization(n, k).n_orth for k in range(1, k_max(n) + 1)]
        if any(b > a for a, b in zip(vals, vals[1:])):
            mono_fail.append(n)
    ok = not (suff_fail or amgm_fail or eq_fail or mono_fail)
    return ok, (f"{plans} plans: sufficiency failures {suff_fail}, bound failures {amgm_fail}, "
                f"equal-factor equality failures {eq_fail}; N_orth monotone failures {mono_fail}")


def criterion_6():
    rng = RngStream(SEED, 6)
    ex = condition_number_study(12, 2, "exhaust", 10_000, rng.child(0))
    gr = condition_number_study(12, 2, "greedy", 10_000, rng.child(1))
    rd = condition_number_study(12, 2, "random", 10_000, rng.child(2))
    mean_it = float(np.mean(rd.iterations))
    ok = (ex.finite_fraction == 1.0 and gr.finite_fraction == 1.0
          and ex.fraction_below(30) >= 0.90 and 1.0 <= mean_it <= 1.5)
    return ok, (f"finite exhaust {ex.finite_fraction:.4f} greedy {gr.finite_fraction:.4f}; "
                f"exhaust below 30: {ex.fraction_below(30):.4f}; random mean iterations {mean_it:.4f}")


def criterion_7():
    est = sqnr_estimate_db(10, 0, 90)
    worst = 0.0
    cells = []
    for i, b in enumerate((6, 10, 14)):
        for j, r in enumerate((40, 70, 90)):
            meas = measure_weak_sqnr_db(b, r, 1_000_000, RngStream(SEED, (7, i, j)))
            d = meas - sqnr_estimate_db(b, 0, r)
            cells.append(f"b{b}/R{r}:{d:+.2f}")
            worst = max(worst, abs(d))
    ok = abs(est - (-29.8)) < 1e-9 and worst <= 2.0
    return ok, f"estimate(10,0,90)={est:.2f} dB; measured-minus-model " + " ".join(cells)


def criterion_8():
    n = 100_000
    rng = RngStream(SEED, 8)
    dig80 = run_digital_baseline(LinkConfig(ratio_db=80), n, rng.child(0)).ser_it
    analog = []
    for i, rho in enumerate((0, 30, 60, 90)):
        analog.append(run_analog_chain(LinkConfig(swipt_snr_db=rho), None, n, rng.child(10 + i)).ser_it)
    spread = max(analog) / min(analog)
    below = []
    for i, r in enumerate((40, 50, 60, 70, 80, 90)):
        cfg = LinkConfig(ratio_db=r)
        a = run_analog_chain(cfg, None, n, rng.child(20 + i)).ser_it
        d = run_digital_baseline(cfg, n, rng.child(20 + i)).ser_it
        below.append((r, a, d))
    all_below = all(a < d for _, a, d in below)
    ok = 0.65 <= dig80 <= 0.80 and spread < 3 and all_below
    pts = " ".join(f"R{r}:{a:.3f}<{d:.3f}" for r, a, d in below)
    return ok, (f"digital SER@80dB {dig80:.4f}; analog SER over rho {[round(x, 4) for x in analog]} "
                f"(max/min {spread:.2f}); analog<digital {pts}")


def criterion_9():
    n = 100_000
    cfg = LinkConfig(swipt_snr_db=60, modulation=16, it_streams=3)
    rng = RngStream(SEED, 9)
    a = run_analog_chain(cfg, None, n, rng)
    d = run_digital_baseline(cfg, n, rng)
    ratio = a.throughput / d.throughput
    return 2.0 <= ratio <= 4.0, (f"analog {a.throughput:.3f} b/sym (SER {a.ser_it:.3f}), "
                                 f"digital {d.throughput:.3f} b/sym (SER {d.ser_it:.3f}), ratio {ratio:.2f}")


def criterion_10():
    n = 100_000
    rng = RngStream(SEED, 10)
    sers = {}
    for se in (0.0, 0.01, 0.1):
        sers[se] = run_analog_chain(LinkConfig(ratio_db=80, sigma_e=se), None, n, rng).ser_it
    dig = run_digital_baseline(LinkConfig(ratio_db=80), n, rng).ser_it
    ok = sers[0.0] < sers[0.01] < sers[0.1] < dig
    return ok, (f"analog perfect {sers[0.0]:.4f}, sigma 0.01 {sers[0.01]:.4f}, "
                f"sigma 0.1 {sers[0.1]:.4f}, digital {dig:.4f}")


def criterion_11():
    out = []
    for k, thetas_ok in ((1, True), (2, True)):
        cfg = LinkConfig(ratio_db=80, k=k, it_snr_db=30, adc_bits=None, noise=False)
        a = run_analog_chain(cfg, None, 10_000, RngStream(SEED, (11, k)))
        d = run_digital_baseline(cfg, 10_000, RngStream(SEED, (11, k)))
        out.append((k, a.ser_it, d.ser_it))
    ok = all(a == 0.0 and d == 0.0 for _, a, d in out)
    return ok, " ".join(f"K={k}: analog {a}, digital {d}" for k, a, d in out)


CRITERIA = [
    (1, "single-interferer optimality", criterion_1, 5.0),
    (2, "worked 6x2 example", criterion_2, 1.0),
    (3, "combinatorial counts", criterion_3, None),
    (4, "factorization optimizer", criterion_4, 10.0),
    (5, "counting bounds and monotonicity", criterion_5, None),
    (6, "condition-number study (12,2)", criterion_6, 180.0),
    (7, "SQNR model", criterion_7, 30.0),
    (8, "near-far SER", criterion_8, 240.0),
    (9, "throughput ratio", criterion_9, 240.0),
    (10, "imperfect cancellation", criterion_10, 240.0),
    (11, "oracle equivalence", criterion_11, None),
]


@pytest.mark.parametrize("n, title, fn, limit", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(n, title, fn, limit):
    ok, detail, elapsed = _run(n, title, fn)
    assert ok, detail
    if limit is not None:
        assert elapsed < limit, f"took {elapsed:.1f} s, limit {limit} s"


if __name__ == "__main__":
    for n, title, fn, _ in CRITERIA:
        _run(n, title, fn)
