import math
from fractions import Fraction as F

import pytest

from krslab.immersion import (ImmersionError, certify, certify_params, f_orders_ok, f_recursion,
                              falling_product, necessary_conditions, q_equals_rkfk_check, q_recursion)
from krslab.series import TruncatedSeries
from krslab.soliton import SolitonParams, make_profile, polynomial_profile, psi_closed_form, psi_origin_series

EXP_GROWTH = SolitonParams(n=2, lam=0, mu=1, nu=2)
MU_N1_WITNESS = SolitonParams(n=2, lam=-1, mu=3, nu=F(8, 27))


def family(mu, n=2):
    return SolitonParams(n=n, lam=mu - n - 1, mu=mu, nu=F(math.factorial(n + 1)) / mu ** (n + 1))


def S(*c, order=None):
    c = [F(x) for x in c]
    if order is not None:
        c = (c + [F(0)] * (order + 1))[: order + 1]
    return TruncatedSeries.from_coeffs(c)


def naive_q(psi_coeffs, eps, K, N):
    """Q_k by full polynomial products, truncated to degree N only at the end of each step."""
    def mul(a, b):
        out = [F(0)] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, z in enumerate(b):
                out[i + j] += x * z
        return out

    def add(a, b):
        m = max(len(a), len(b))
        return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(m)]

    q = [F(0), F(1)]
    out = [q]
    for k in range(1, K):
        dq = [i * q[i] for i in range(1, len(q))] or [F(0)]
        q = add(mul([F(-k), F(eps)], q), mul(dq, psi_coeffs))[: N + 1]
        out.append(q)
    return out


def test_q_recursion_examples():
    qs = q_recursion(S(0, 1, order=8), 0, 6)
    assert all(c == 0 for c in qs[1].coeffs)
    qs = q_recursion(S(0, 1, 1, order=10), 0, 6)
    for k, q in enumerate(qs, start=1):
        assert q.coeffs == tuple(math.factorial(k - 1) if i == k else 0 for i in range(11))
    qs = q_recursion(S(0, 1, order=10), 1, 6)
    for k, q in enumerate(qs, start=1):
        assert q.coeffs == tuple(1 if i == k else 0 for i in range(11))


@pytest.mark.parametrize("eps", [-1, 0, 1])
def test_q_recursion_against_naive_products(eps):
    psi = psi_origin_series(MU_N1_WITNESS, 14)
    fast = q_recursion(psi, eps, 8)
    slow = naive_q(list(psi.coeffs), eps, 8, 14)
    for a, b in zip(fast, slow):
        assert list(a.coeffs) == (b + [F(0)] * 15)[:15]


def test_q_recursion_rejects_constant_term():
    with pytest.raises(ImmersionError):
        q_recursion(S(1, 1, 0), 0, 3)
    with pytest.raises(ImmersionError):
        q_recursion(S(0, 1, 0), 2, 3)


def test_certify_witnesses():
    for eps in (0, 1):
        c = certify_params(EXP_GROWTH, eps, K=20)
        assert c.verdict == "certified_to_K" and c.certified and c.regime == "exact"
        assert c.first_violation is None
    c = certify_params(MU_N1_WITNESS, -1, K=20)
    assert c.verdict == "certified_to_K"
    assert c.to_json()["per_k_min"][0] == {"k": 1, "min": "1", "index": 1}


def test_certify_violation():
    c = certify(S(0, 1, -1, order=20), 0, K=20)
    assert c.verdict == "violated"
    v = c.first_violation
    assert (v.k, v.index, v.value) == (2, 2, -1)
    assert c.to_json()["first_violation"] == {"k": 2, "index": 2, "value": "-1"}


def test_certify_local_criterion_and_regimes():
    # Q_2 = psi - y for eps = 0; its y^3 coefficient is negative but the y^2 one leads
    psi = psi_origin_series(family(F(-1, 10)), 30)
    assert psi.coeffs[3] < 0
    assert certify(psi, 0, 10).verdict == "violated"
    assert certify(psi, 0, 10, criterion="local").verdict == "certified_to_K"
    fl = TruncatedSeries.from_coeffs([0.0, 1.0, 1 / 3, 1 / 12] + [0.0] * 20)
    c = certify(fl, 0, 10)
    assert c.verdict == "numeric_evidence" and c.regime.startswith("float")
    with pytest.raises(ImmersionError, match="order"):
        certify(S(0, 1, 1, order=5), 0, 10)
    with pytest.raises(ImmersionError):
        certify(psi, 0, 10, criterion="global")


def test_f_recursion_examples():
    fs = f_recursion(S(0, 1, order=6), 3)
    assert all(c == 0 for c in fs[1].coeffs)
    fs = f_recursion(S(0, 1, 1, order=6), 2)
    assert fs[1].coeffs[:4] == (0, 0, 2, 2)
    fs = f_recursion(psi_origin_series(EXP_GROWTH, 40), 10)
    assert all(c >= 0 for f in fs for c in f.coeffs)
    assert all(f_orders_ok(fs))


def test_q_equals_rkfk():
    assert q_equals_rkfk_check(polynomial_profile([0, 1]), K=1, r_values=(0.3,))
    res = q_equals_rkfk_check(polynomial_profile([0, 1, 1]), K=2, r_values=(0.2,), detailed=True)
    row = [r for r in res.rows if r[0] == 2][0]
    r = 0.2
    assert abs(row[2] - r * r / (1 - r) ** 2) < 1e-12
    assert abs(row[3] - r * r / (1 - r) ** 2) < 1e-8
    res = q_equals_rkfk_check(make_profile(EXP_GROWTH), K=4, r_values=(0.05, 0.1), detailed=True)
    assert res.passed and res.max_rel_error < 1e-6


def test_falling_product():
    assert falling_product(F(2), 1) == 2
    assert falling_product(F(2), 2) == 0
    assert falling_product(F(5), 3) == 5 * 4 * 3 * 2


def test_necessary_flat_passes():
    rep = necessary_conditions(polynomial_profile([0, 1], n=2, lam=0))
    assert rep.passed
    assert [c.status for c in rep.checks] == ["pass", "pass", "pass", "vacuous"]


def test_necessary_half_integer_fails_ii():
    rep = necessary_conditions(polynomial_profile([-3, 2], y_inf=F(3, 2), n=2, lam=1))
    assert rep.check("i").status == "pass"
    assert rep.failed == ["ii"]
    assert any("necessary only" in note for note in rep.notes)


def test_necessary_irrational_lambda():
    lam, mu = math.sqrt(2), 1.0
    base = psi_closed_form(SolitonParams(n=2, lam=lam, mu=mu, nu=0.0), 2.0)
    p = SolitonParams(n=2, lam=lam, mu=mu, nu=-base * 2 / math.exp(2))
    rep = necessary_conditions(make_profile(p, y_inf=2, y_sup=3))
    iii = rep.check("iii")
    assert iii.status == "fail" and abs(iii.value - (2 - 2 * math.sqrt(2))) < 1e-12
    assert rep.check("iv").status == "undecidable" and rep.check("iv").regime == "numeric"
    assert not rep.passed


def test_product_identity_and_vanishing_tail():
    # psi = y (y - 2) / 2 vanishes at h = 2 with psi'(2) = 1
    rep = necessary_conditions(polynomial_profile([0, -1, F(1, 2)], y_inf=2, n=2, lam=F(1, 2)), K=8)
    assert rep.passed
    for kk, q, prod in rep.q_values:
        assert q == prod == falling_product(F(2), kk - 1)
        if kk >= 3:
            assert q == 0
    assert rep.q_dot[0] == rep.q_dot[1]


def test_necessary_rejects_n1():
    with pytest.raises(ImmersionError):
        necessary_conditions(polynomial_profile([0, 1], n=1))
