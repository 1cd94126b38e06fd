import numpy as np
import pytest

from api.v1.exceptions.powerseries import InnerConstantOutOfRangeException, ZeroOrderSeriesException
from api.v1.schemas.powerseries import TruncatedSeries
from api.v1.services import powerseries


def series(*coeffs: float) -> TruncatedSeries:
    return TruncatedSeries(coeffs=list(coeffs))


def test_series_is_read_only():
    a = series(1.0, 2.0)
    with pytest.raises(ValueError):
        a.coeffs[0] = 5.0


def test_empty_series_rejected():
    with pytest.raises(ValueError):
        TruncatedSeries(coeffs=[])


def test_identity_and_constant():
    assert powerseries.identity(3).coeffs.tolist() == [0.0, 1.0, 0.0, 0.0]
    assert powerseries.constant(0.5, 2).coeffs.tolist() == [0.5, 0.0, 0.0]


def test_multiply_truncates_to_shorter_order():
    product = powerseries.multiply(series(1.0, 1.0, 0.0), series(1.0, 1.0))
    assert product.order == 1
    assert product.coeffs.tolist() == [1.0, 2.0]


def test_multiply_matches_convolution():
    rng = np.random.default_rng(3)
    a = rng.random(9)
    b = rng.random(9)
    product = powerseries.multiply(series(*a), series(*b))
    assert product.coeffs == pytest.approx(np.convolve(a, b)[:9], rel=1e-14)


def test_power_by_squaring(subcritical_law):
    f = powerseries.from_law(subcritical_law, 12)
    cubed = powerseries.power(f, 3)
    repeated = powerseries.multiply(powerseries.multiply(f, f), f)
    assert cubed.coeffs == pytest.approx(repeated.coeffs, abs=1e-16)
    assert powerseries.power(f, 1) is f


def test_power_needs_positive_exponent():
    with pytest.raises(ValueError):
        powerseries.power(series(0.5, 0.5), 0)


def test_compose_with_identity(subcritical_law):
    f = powerseries.from_law(subcritical_law, 6)
    composed = powerseries.compose(f, powerseries.identity(6))
    assert composed.coeffs == pytest.approx(f.coeffs, abs=1e-16)


def test_compose_evaluates_like_nested_calls(subcritical_law):
    f = powerseries.from_law(subcritical_law, 8)
    f2 = powerseries.compose(f, f)
    inner = powerseries.evaluate(f, 0.3)
    assert powerseries.evaluate(f2, 0.3) == pytest.approx(powerseries.evaluate(f, inner), abs=1e-15)


def test_compose_rejects_inner_constant_at_one():
    with pytest.raises(InnerConstantOutOfRangeException):
        powerseries.compose(series(0.5, 0.5), series(1.0, 0.0))


def test_tail_loss_tracks_dropped_mass(supercritical_law):
    f = powerseries.from_law(supercritical_law, 1)
    assert f.tail_loss == pytest.approx(0.75)
    square = powerseries.multiply(powerseries.from_law(supercritical_law, 2), powerseries.from_law(supercritical_law, 2))
    assert square.tail_loss == pytest.approx(1.0 - square.coeffs.sum(), abs=1e-15)


def test_differentiate():
    derivative = powerseries.differentiate(series(1.0, 2.0, 3.0))
    assert derivative.coeffs.tolist() == [2.0, 6.0]
    with pytest.raises(ZeroOrderSeriesException):
        powerseries.differentiate(series(1.0))


def test_coefficient_beyond_order_is_zero():
    a = series(0.25, 0.75)
    assert powerseries.coefficient(a, 1) == 0.75
    assert powerseries.coefficient(a, 5) == 0.0


def test_iterate_law_yields_every_step(subcritical_law):
    iterates = list(powerseries.iterate_law(subcritical_law, 3, 12))
    assert len(iterates) == 4
    assert iterates[0].coeffs.tolist() == powerseries.identity(12).coeffs.tolist()
    assert powerseries.evaluate(iterates[3], 0.0) == pytest.approx(0.7900390625, abs=1e-15)


def test_iterate_law_keeps_outer_masses_below_law_degree(lf_law):
    # order far below the truncation order of the law
    low = list(powerseries.iterate_law(lf_law, 5, 4))[-1]
    high = list(powerseries.iterate_law(lf_law, 5, 64))[-1]
    assert low.coeffs == pytest.approx(high.coeffs[:5], abs=1e-15)
