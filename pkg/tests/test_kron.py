import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ascancel.channel import DuplicateAngleError, RngStream, SteeringParams, steering_matrix, steering_vector
from ascancel.kron import (
    FactorizationPlan,
    InvalidPlanError,
    PhaseProgram,
    ProgramFormatError,
    best_factorization_exhaustive,
    build_component,
    build_vector,
    compile_phase_program,
    construct_canceller,
    evaluate_program,
    counting_bound_checks,
    format_program,
    fourier_program,
    generate_mother_set,
    k_max,
    kron_decompose,
    merge_smallest_factorization,
    mother_set_meta,
    optimal_factorization,
    ordered_factorizations,
    parse_program,
    prime_factorize,
    resolve_plan,
    select_independent,
    zf_residual,
)
from ascancel.numeric import kron_left_chain
from ascancel.single import fourier_canceller

angles = st.floats(0, 2 * math.pi, allow_nan=False, exclude_max=True)


def test_prime_factorize_and_k_max():
    assert prime_factorize(360) == [(2, 3), (3, 2), (5, 1)]
    assert prime_factorize(97) == [(97, 1)]
    assert [k_max(n) for n in (2, 6, 12, 16, 64, 97)] == [1, 2, 3, 4, 6, 1]
    with pytest.raises(ValueError):
        prime_factorize(1)


def test_plan_properties():
    p = FactorizationPlan((2, 3, 4))
    assert (p.n_r, p.k, p.n_orth, p.n_sub, p.mother_set_size) == (24, 3, 6, 6, 36)
    assert p.strides == (1, 2, 6)
    with pytest.raises(InvalidPlanError):
        FactorizationPlan((1, 4))
    with pytest.raises(InvalidPlanError):
        FactorizationPlan(())


def test_optimal_factorization_examples():
    assert optimal_factorization(12, 2).factors == (3, 4)
    assert optimal_factorization(16, 2).factors == (4, 4)
    assert optimal_factorization(7, 1).factors == (7,)
    with pytest.raises(InvalidPlanError, match="K_max"):
        optimal_factorization(6, 3)
    with pytest.raises(InvalidPlanError):
        optimal_factorization(6, 0)


def test_merge_heuristic_vs_optimum():
    assert merge_smallest_factorization(12, 2).factors == (3, 4)
    assert merge_smallest_factorization(36, 2).factors == (4, 9)
    assert optimal_factorization(36, 2).factors == (6, 6)
    assert optimal_factorization(64, 2).factors == (8, 8)
    with pytest.raises(InvalidPlanError):
        merge_smallest_factorization(6, 3)


def test_ordered_factorizations_small():
    assert sorted(ordered_factorizations(12, 2)) == [(2, 6), (3, 4), (4, 3), (6, 2)]
    assert list(ordered_factorizations(5, 2)) == []


def test_optimizer_matches_enumeration_small():
    for n in range(2, 65):
        for k in range(1, k_max(n) + 1):
            best, arg = best_factorization_exhaustive(n, k)
            plan = optimal_factorization(n, k)
            assert plan.n_orth == best and plan.factors in arg


def test_resolve_plan():
    assert resolve_plan(12, 2).factors == (3, 4)
    assert resolve_plan(12, 2, (2, 6)).factors == (2, 6)
    with pytest.raises(InvalidPlanError):
        resolve_plan(12, 2, (2, 4))
    with pytest.raises(InvalidPlanError):
        resolve_plan(12, 2, (2, 2, 3))


@given(angles, st.sampled_from([(2, 3), (3, 2), (2, 2, 2), (4, 3), (2, 3, 2)]))
def test_decompose_reconstructs(theta, factors):
    plan = FactorizationPlan(factors)
    comps = kron_decompose(SteeringParams(theta, plan.n_r), plan)
    np.testing.assert_allclose(kron_left_chain(comps), steering_vector(SteeringParams(theta, plan.n_r)), atol=1e-12)


def test_decompose_size_mismatch():
    with pytest.raises(InvalidPlanError):
        kron_decompose(SteeringParams(0.1, 8), FactorizationPlan((2, 3)))


@given(angles, st.integers(2, 7), st.integers(1, 4), st.data())
def test_component_nulls_target(theta, n, stride, data):
    row = data.draw(st.integers(1, n - 1))
    c = build_component(theta, n, stride, row)
    target = np.exp(1j * np.arange(n) * stride * theta)
    assert abs(c @ target) < 1e-10
    np.testing.assert_allclose(np.abs(c), 1.0)


def test_component_row_range():
    with pytest.raises(ValueError):
        build_component(0.1, 3, 1, 0)
    with pytest.raises(ValueError):
        build_component(0.1, 3, 1, 3)


@given(st.lists(angles, min_size=3, max_size=3, unique=True), st.data())
@settings(max_examples=40)
def test_vector_nulls_all(thetas, data):
    plan = FactorizationPlan((2, 3, 2))
    order = data.draw(st.permutations(range(3)))
    rows = tuple(data.draw(st.integers(1, n - 1)) for n in plan.factors)
    s = build_vector(plan, order, rows, thetas)
    assert np.max(np.abs(s @ steering_matrix(thetas, 12))) < 1e-10
    np.testing.assert_allclose(np.abs(s), 1.0, atol=1e-12)


def test_build_vector_validation():
    plan = FactorizationPlan((2, 3))
    with pytest.raises(ValueError):
        build_vector(plan, (0, 0), (1, 1), (0.1, 0.2))
    with pytest.raises(InvalidPlanError):
        build_vector(plan, (0, 1), (1,), (0.1, 0.2))


def test_single_component_plan_matches_fourier_rows():
    # K = 1: the mother set is the Fourier canceller's row set
    theta = 0.9
    ms = generate_mother_set(FactorizationPlan((5,)), (theta,))
    S = fourier_canceller(SteeringParams(theta, 5)).matrix
    got = {tuple(np.round(v, 10)) for v in ms.vectors}
    want = {tuple(np.round(r, 10)) for r in S}
    assert got == want


@pytest.mark.parametrize("factors", [(2, 3), (3, 4), (2, 6), (2, 2, 3), (2, 2, 2, 2)])
def test_mother_set_size_and_same_order_orthogonality(factors):
    plan = FactorizationPlan(factors)
    k = plan.k
    thetas = np.linspace(0.3, 5.0, k)
    ms = generate_mother_set(plan, thetas)
    assert len(ms) == math.factorial(k) * math.prod(f - 1 for f in factors)
    for order in itertools.permutations(range(k)):
        idx = ms.subset_indices(order)
        V = ms.vectors[idx]
        np.testing.assert_allclose(V.conj() @ V.T, plan.n_r * np.eye(len(idx)), atol=1e-9)


def test_mother_set_meta_is_lexicographic():
    meta = mother_set_meta(FactorizationPlan((2, 3)))
    assert [(m.order, m.rows) for m in meta] == [
        ((0, 1), (1, 1)), ((0, 1), (1, 2)), ((1, 0), (1, 1)), ((1, 0), (1, 2)),
    ]


def test_mother_set_rejects_duplicates():
    with pytest.raises(DuplicateAngleError):
        generate_mother_set(FactorizationPlan((2, 3)), (0.5, 0.5))
    with pytest.raises(InvalidPlanError):
        generate_mother_set(FactorizationPlan((2, 3)), (0.5,))


def _ms(seed, n_r=12, k=2):
    rng = np.random.default_rng(seed)
    return generate_mother_set(optimal_factorization(n_r, k), rng.uniform(0, 2 * math.pi, k))


@pytest.mark.parametrize("method", ["exhaust", "greedy", "random"])
def test_selection_contract(method):
    ms = _ms(3)
    sel = select_independent(ms, method=method, rng=RngStream(0))
    assert len(sel.indices) == 10 and len(set(sel.indices)) == 10
    assert sel.metrics.numeric_rank == 10 and math.isfinite(sel.metrics.condition_number)
    assert sel.method == method


def test_iteration_accounting():
    ms = _ms(4)
    assert select_independent(ms, method="exhaust").iterations == 66
    g = select_independent(ms, method="greedy")
    # grow from one seed vector to 10: sum of remaining candidates per step
    assert g.iterations == sum(12 - j for j in range(1, 10))
    assert select_independent(ms, method="random", rng=RngStream(1)).iterations >= 1


def test_greedy_not_better_than_exhaust():
    for seed in range(30):
        ms = _ms(seed)
        ex = select_independent(ms, method="exhaust").metrics.condition_number
        gr = select_independent(ms, method="greedy").metrics.condition_number
        assert ex <= gr * (1 + 1e-12)


def test_branch_and_bound_matches_brute_force():
    # (12, 3) has C(18, 9) = 48620 subsets, above the brute-force limit
    from ascancel import kron

    for seed in range(3):
        ms = _ms(seed, 12, 3)
        bb = select_independent(ms, method="exhaust")
        old = kron.EXHAUST_BRUTE_LIMIT
        kron.EXHAUST_BRUTE_LIMIT = 10**9
        try:
            brute = select_independent(ms, method="exhaust")
        finally:
            kron.EXHAUST_BRUTE_LIMIT = old
        assert bb.metrics.condition_number == pytest.approx(brute.metrics.condition_number, rel=1e-9)


def test_selection_errors():
    ms = _ms(0)
    with pytest.raises(ValueError):
        select_independent(ms, method="bogus")
    with pytest.raises(ValueError):
        select_independent(ms, method="random")
    with pytest.raises(ValueError):
        select_independent(ms, count_needed=13)


def test_construct_canceller_contract():
    thetas = (0.4, 1.9, 3.3)
    c = construct_canceller(12, thetas, "greedy")
    S = c.canceller.matrix
    assert S.shape == (9, 12)
    assert zf_residual(S, thetas) <= 1e-10
    np.testing.assert_allclose(np.abs(S), 1.0, atol=1e-12)
    assert c.metrics.numeric_rank == 9
    with pytest.raises(InvalidPlanError):
        construct_canceller(6, (0.1, 0.2, 0.3))


def test_program_matches_direct_construction():
    plan = FactorizationPlan((2, 3, 2))
    thetas = (0.3, 1.7, 4.0)
    prog = compile_phase_program(plan, (2, 0, 1), (1, 2, 1))
    direct = build_vector(plan, (2, 0, 1), (1, 2, 1), thetas)
    np.testing.assert_allclose(evaluate_program(prog, thetas).matrix[0], direct, atol=1e-12)


def test_fourier_program_matches_canceller():
    np.testing.assert_allclose(
        evaluate_program(fourier_program(6), [1.3]).matrix,
        fourier_canceller(SteeringParams(1.3, 6)).matrix,
        atol=1e-12,
    )


def test_program_round_trip_and_shifted_angles():
    c = construct_canceller(6, (0.7, 2.1))
    text = format_program(c.program)
    again = parse_program(text)
    np.testing.assert_array_equal(again.beta, c.program.beta)
    np.testing.assert_array_equal(again.gamma, c.program.gamma)
    np.testing.assert_array_equal(evaluate_program(again, (0.7, 2.1)).matrix, c.canceller.matrix)
    shifted = (1.1, 5.2)
    assert zf_residual(evaluate_program(again, shifted).matrix, shifted) <= 1e-10


def test_program_angle_count():
    with pytest.raises(ValueError):
        fourier_program(4).phases([0.1, 0.2])
    with pytest.raises(ValueError):
        PhaseProgram(np.zeros((2, 3)), np.zeros((2, 2, 1)))


@pytest.mark.parametrize(
    "mutate, lineno",
    [
        (lambda ls: ["# nope"] + ls[1:], 1),
        (lambda ls: ls[:1] + ["shape 2 x 1"] + ls[2:], 2),
        (lambda ls: ls[:3] + ["0 1 zz -1"] + ls[4:], 4),
        (lambda ls: ls[:3] + ["0 1 0.5"] + ls[4:], 4),
        (lambda ls: ls[:3] + [ls[2]] + ls[4:], 4),
        (lambda ls: ls[:3] + ["9 9 0.1 1"] + ls[4:], 4),
    ],
)
def test_parse_errors_carry_line_numbers(mutate, lineno):
    lines = format_program(fourier_program(3)).splitlines()
    with pytest.raises(ProgramFormatError) as exc:
        parse_program("\n".join(mutate(lines)))
    assert exc.value.lineno == lineno
    assert f"line {lineno}" in str(exc.value)


def test_parse_missing_entry():
    lines = format_program(fourier_program(3)).splitlines()
    with pytest.raises(ProgramFormatError, match="missing entry"):
        parse_program("\n".join(lines[:-1]))


def test_counting_bound_checks_small():
    assert counting_bound_checks(FactorizationPlan((2, 3))) == (True, True)
    assert counting_bound_checks(FactorizationPlan((4, 4))) == (True, True)
    # (2, 8): prod(n_i - 1) = 7 <= (4 - 1)^2 = 9
    assert counting_bound_checks(FactorizationPlan((2, 8)))[1]
