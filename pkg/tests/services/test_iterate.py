import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from api.v1.exceptions.asymptotics import CriticalLawException
from api.v1.exceptions.iterate import TruncationLossExceededException
from api.v1.services import powerseries
from api.v1.services.iterate import (
    fn_derivatives,
    fn_prime,
    gap_map,
    iterate_f,
    iterated_series,
    lf_closed_form,
    lf_fixed_points,
    transition_matrix,
    transition_row,
)
from api.v1.services.offspring import linear_fractional, validate


def brute_force_row(probs: list[float], i: int, n: int, j_max: int) -> np.ndarray:
    """Coefficients of [f_n(s)]^i by plain polynomial substitution."""
    f_n = np.array([0.0, 1.0])
    for _ in range(n):
        composed = np.zeros(1)
        for coefficient in reversed(probs):
            composed = P.polyadd(P.polymul(composed, f_n), [coefficient])
        f_n = composed
    row = P.polypow(f_n, i)
    padded = np.zeros(max(row.size, j_max + 1))
    padded[: row.size] = row
    return padded[: j_max + 1]


def test_iterate_f_hand_values(dual_law, subcritical_law):
    rows = iterate_f(dual_law, 0.0, 2).rows
    assert [row.f_n_at_s for row in rows] == pytest.approx([0.0, 0.75, 0.890625], abs=1e-15)

    trace = iterate_f(subcritical_law, 0.0, 3)
    assert trace.rows[-1].f_n_at_s == pytest.approx(0.790039, abs=1e-6)
    assert trace.rows[-1].R_n is None


def test_iterate_f_records_gaps(supercritical_law, supercritical_params):
    q, beta = supercritical_params.q, supercritical_params.beta
    trace = iterate_f(supercritical_law, 0.0, 20, q, beta)
    assert len(trace.rows) == 21
    for row in trace.rows:
        assert row.R_n == pytest.approx(q - row.f_n_at_s, abs=1e-15)
        assert row.normalized == pytest.approx(beta**row.n / row.R_n, rel=1e-14)


def test_iterate_f_fixed_point(supercritical_law, supercritical_params):
    rows = iterate_f(supercritical_law, supercritical_params.q, 30).rows
    assert max(abs(row.f_n_at_s - supercritical_params.q) for row in rows) < 1e-12


def test_iterate_f_negative_steps(supercritical_law):
    with pytest.raises(ValueError):
        iterate_f(supercritical_law, 0.0, -1)


def test_gap_map_is_one_step_of_the_gap(subcritical_law):
    step = gap_map(subcritical_law, 1.0)
    for gap in (1.0, 0.5, 1e-3):
        f_value = 0.5 + 0.25 * (1.0 - gap) + 0.25 * (1.0 - gap) ** 2
        assert step(gap) == pytest.approx(1.0 - f_value, rel=1e-12)
    # no cancellation for tiny gaps
    assert step(1e-200) == pytest.approx(0.75e-200, rel=1e-12)


def test_fn_prime(dual_law, supercritical_law, supercritical_params):
    assert fn_prime(dual_law, 0.3, 0) == 1.0
    assert fn_prime(dual_law, 0.0, 2) == 0.0
    for n in range(1, 8):
        assert fn_prime(supercritical_law, supercritical_params.q, n) == pytest.approx(
            supercritical_params.beta**n, rel=1e-12
        )


def test_fn_derivatives_match_series(subcritical_law):
    value, first, second = fn_derivatives(subcritical_law, 0.0, 3)
    coefficients = brute_force_row([0.5, 0.25, 0.25], 1, 3, 8)
    assert value == pytest.approx(coefficients[0], abs=1e-15)
    assert first == pytest.approx(coefficients[1], abs=1e-15)
    assert second == pytest.approx(2.0 * coefficients[2], abs=1e-15)


@pytest.mark.parametrize("i", [1, 2, 3])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_transition_row_matches_brute_force(subcritical_law, i, n):
    row = transition_row(subcritical_law, i, n, 12, check_loss=False)
    expected = brute_force_row([0.5, 0.25, 0.25], i, n, 12)
    assert len(row.probs) == 13
    assert np.max(np.abs(np.asarray(row.probs) - expected)) < 1e-10


def one_step_matrix(probs: list[float], size: int) -> np.ndarray:
    """P_ij(1) on states 0..size, row i holding the coefficients of f(s)^i."""
    matrix = np.zeros((size + 1, size + 1))
    matrix[0, 0] = 1.0
    for i in range(1, size + 1):
        row = P.polypow(probs, i)[: size + 1]
        matrix[i, : row.size] = row
    return matrix


@pytest.mark.parametrize("n", [1, 2, 3])
def test_transition_row_matches_matrix_power(subcritical_law, n):
    # from i <= 3 the chain stays within 3 * 2^2 = 12 states for two steps
    brute = np.linalg.matrix_power(one_step_matrix([0.5, 0.25, 0.25], 24), n)
    for i in (1, 2, 3):
        row = transition_row(subcritical_law, i, n, 12, check_loss=False)
        assert np.max(np.abs(np.asarray(row.probs) - brute[i, :13])) < 1e-10


def test_iterated_series_is_last_iterate(subcritical_law):
    series = iterated_series(subcritical_law, 3, 8)
    expected = brute_force_row([0.5, 0.25, 0.25], 1, 3, 8)
    assert series.order == 8
    assert np.max(np.abs(series.coeffs - expected)) < 1e-14
    assert np.array_equal(iterated_series(subcritical_law, 0, 4).coeffs, powerseries.identity(4).coeffs)


def test_gap_bound_below_q(supercritical_law, supercritical_params):
    q, beta = supercritical_params.q, supercritical_params.beta
    for s in (0.0, 0.1, 0.25):
        for row in iterate_f(supercritical_law, s, 60, q, beta).rows:
            assert abs(row.R_n) <= q * beta**row.n * (1.0 + 1e-12)


def test_gap_can_exceed_bound_above_q(supercritical_law, supercritical_params):
    q, beta = supercritical_params.q, supercritical_params.beta
    rows = iterate_f(supercritical_law, 2.0 / 3.0, 2, q, beta).rows
    assert rows[2].R_n == pytest.approx(-0.171875, abs=1e-12)
    assert abs(rows[2].R_n) > max(q, 1.0 - q) * beta**2
    # beta^n / |R_n| still never increases above q
    trace = [abs(row.normalized) for row in iterate_f(supercritical_law, 2.0 / 3.0, 40, q, beta).rows]
    assert all(following <= current * (1.0 + 1e-12) for current, following in zip(trace, trace[1:]))


def test_transition_row_conserves_mass(subcritical_law):
    row = transition_row(subcritical_law, 3, 3, 24)
    assert sum(row.probs) == pytest.approx(1.0, abs=1e-14)
    assert row.truncation_loss < 1e-14


def test_transition_row_truncation_loss(subcritical_law):
    with pytest.raises(TruncationLossExceededException):
        transition_row(subcritical_law, 3, 3, 4)


def test_transition_row_rejects_bad_arguments(subcritical_law):
    with pytest.raises(ValueError):
        transition_row(subcritical_law, 0, 1, 4)


def test_transition_matrix_rows(subcritical_law):
    matrix = transition_matrix(subcritical_law, 1, 6)
    assert matrix[0, 0] == 1.0
    assert matrix[1, :3].tolist() == pytest.approx([0.5, 0.25, 0.25])
    for i in (1, 2, 3):
        assert matrix[i].sum() == pytest.approx(1.0, abs=1e-15)
    assert np.array_equal(transition_matrix(subcritical_law, 0, 4), np.eye(5))


def test_lf_fixed_points():
    q, other = lf_fixed_points(linear_fractional(0.3, 0.6))
    assert q == pytest.approx(5.0 / 12.0, abs=1e-15)
    assert other == 1.0
    assert lf_fixed_points(linear_fractional(0.2, 0.5)) == pytest.approx((1.0, 1.2))


def test_lf_fixed_points_rejects_finite_law(subcritical_law):
    with pytest.raises(ValueError):
        lf_fixed_points(subcritical_law)


def test_lf_fixed_points_rejects_critical_law():
    # b = (1 - c)^2 gives m = 1
    with pytest.raises(CriticalLawException):
        lf_fixed_points(linear_fractional(0.25, 0.5))


@pytest.mark.parametrize("b, c", [(0.2, 0.5), (0.3, 0.6)])
def test_lf_closed_form_matches_iteration(b, c):
    law = linear_fractional(b, c)
    for s in (0.0, 0.3, 0.7):
        rows = iterate_f(law, s, 60).rows
        for row in rows:
            assert lf_closed_form(law, s, row.n).f_n == pytest.approx(row.f_n_at_s, abs=1e-10)


def test_lf_closed_form_gap_identity(lf_law):
    # m^n / R_n(0) = 1 + gamma (1 - m^n) with gamma = 5
    for n in range(41):
        gap = lf_closed_form(lf_law, 0.0, n).R_n
        assert 0.8**n / gap == pytest.approx(1.0 + 5.0 * (1.0 - 0.8**n), rel=1e-10)


def test_lf_gap_map_matches_closed_form(lf_law):
    step = gap_map(lf_law, 1.0)
    gap = 1.0
    for n in range(40):
        assert gap == pytest.approx(lf_closed_form(lf_law, 0.0, n).R_n, rel=1e-12)
        gap = step(gap)


def test_pmf_and_truncated_lf_agree():
    law = linear_fractional(0.2, 0.5)
    finite = validate([0.6] + [0.2 * 0.5 ** (k - 1) for k in range(1, 60)], renormalize=True)
    exact = iterate_f(law, 0.0, 10).rows[-1].f_n_at_s
    assert iterate_f(finite, 0.0, 10).rows[-1].f_n_at_s == pytest.approx(exact, abs=1e-14)
