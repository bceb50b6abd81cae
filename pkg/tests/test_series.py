import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krslab.series import (EXACT, Domain, SeriesError, TruncatedSeries, float_domain, polynomial,
                           recenter_polynomial, series_add, series_derivative, series_eval,
                           series_exp_linear, series_mul)
from krslab.soliton import SolitonParams, psi_origin_series


def S(*c, base=0):
    return TruncatedSeries.from_coeffs([F(x) for x in c], base)


rationals = st.fractions(min_value=-5, max_value=5, max_denominator=12)


@st.composite
def series(draw, order=None):
    K = order if order is not None else draw(st.integers(0, 6))
    return TruncatedSeries.from_coeffs(draw(st.lists(rationals, min_size=K + 1, max_size=K + 1)))


def test_add_examples():
    assert S(0, 1, 0) + S(0, 0, 1) == S(0, 1, 1)
    assert series_add(S(0, 1, -1), S(0, 0, 1)) == S(0, 1, 0)


def test_add_two_origin_series():
    p1 = SolitonParams(n=2, lam=0, mu=1, nu=2)
    p2 = SolitonParams(n=2, lam=-1, mu=3, nu=F(8, 27))
    s = psi_origin_series(p1, 8) + psi_origin_series(p2, 8)
    for k in range(1, 8):
        want = sum(p.nu * p.mu ** (2 + k) / math.factorial(2 + k) for p in (p1, p2))
        assert s[k + 1] == want


def test_mul_examples():
    assert S(0, 1, 0) * S(0, 1, 0) == S(0, 0, 1)
    assert series_mul(S(1, 1, 0), S(1, -1, 0)) == S(1, 0, -1)
    assert S(0, 1, F(1, 3), 0) * S(0, 1, 0, 0) == S(0, 0, 1, F(1, 3))


def test_truncation_is_min_order():
    assert (S(1, 1, 1, 1) * S(1, 1)).order == 1
    assert (S(1, 1, 1, 1) + S(1, 1, 1)).order == 2


def test_derivative_examples():
    assert series_derivative(S(0, 0, 1)) == S(0, 2)
    assert S(0, 1, F(1, 3), F(1, 12)).derivative() == S(1, F(2, 3), F(1, 4))
    assert S(7, 0).derivative() == S(0)
    with pytest.raises(SeriesError):
        S(7).derivative()


def test_exp_linear_examples():
    assert series_exp_linear(0, 3).coeffs == (1, 0, 0, 0)
    assert series_exp_linear(1, 3).coeffs == (1, 1, F(1, 2), F(1, 6))
    assert series_exp_linear(-1, 2).coeffs == (1, -1, F(1, 2))


def test_eval_examples():
    assert series_eval(S(0, 1, 1), 1) == 2
    assert series_eval(TruncatedSeries.zero(5), F(3, 7)) == 0
    psi = psi_origin_series(SolitonParams(n=2, lam=0, mu=1, nu=2), 40)
    assert abs(float(series_eval(psi, 1)) - (2 * math.e - 4)) < 1e-13


def test_mismatch_rejected():
    with pytest.raises(SeriesError, match="base point"):
        S(1, 1) + S(1, 1, base=1)
    fl = TruncatedSeries.from_coeffs([1.0, 2.0])
    with pytest.raises(SeriesError, match="domain"):
        S(1, 1) * fl
    with pytest.raises(SeriesError):
        TruncatedSeries((), F(0), EXACT)
    with pytest.raises(SeriesError):
        Domain("float")
    with pytest.raises(SeriesError):
        TruncatedSeries.from_coeffs([0.5], domain=EXACT)


def test_float_domain_carries_precision():
    s = TruncatedSeries.from_coeffs([1, 2], domain=float_domain(200))
    assert str(s.domain) == "float(200)"
    assert s.domain != EXACT


def test_shift_and_valuation():
    s = S(0, 0, 3, 1)
    assert s.valuation() == 2
    assert s.shift_down() == S(0, 3, 1)
    assert s.shift_down().shift_up() == S(0, 0, 3, 1)
    with pytest.raises(SeriesError):
        S(1, 1).shift_down()


def test_polynomial_and_recentre():
    assert polynomial([0, 1], 3) == S(0, 1, 0, 0)
    with pytest.raises(SeriesError):
        polynomial([0, 0, 0, 1], 2)
    r = recenter_polynomial([0, 1, 1], 2, 4)
    assert r.base_point == 2 and r.coeffs == (6, 5, 1, 0, 0)
    for y in (F(1, 3), F(5, 2)):
        assert r(y) == y + y * y


@settings(max_examples=60, deadline=None)
@given(series(4), series(4), series(4))
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)


@settings(max_examples=60, deadline=None)
@given(series(5), series(5))
def test_leibniz(a, b):
    lhs = (a * b).derivative()
    rhs = a.derivative() * b.truncate(4) + a.truncate(4) * b.derivative()
    assert lhs == rhs


@settings(max_examples=60, deadline=None)
@given(series(5), series(5), st.fractions(min_value=-F(1, 2), max_value=F(1, 2), max_denominator=20))
def test_eval_of_product_within_truncation_bound(a, b, y):
    K = 5
    full = [F(0)] * (2 * K + 1)
    for i, x in enumerate(a):
        for j, z in enumerate(b):
            full[i + j] += x * z
    C = max(abs(c) for c in full)
    err = abs(series_eval(a * b, y) - series_eval(a, y) * series_eval(b, y))
    # tail of the exact product beyond order K, bounded geometrically for |y| <= 1/2
    assert err <= C * abs(y) ** (K + 1) * 2
