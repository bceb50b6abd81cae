"""Immersibility of radial metrics into complex space forms.

For a profile psi(y) and curvature sign eps in {-1, 0, 1}:

    Q_1 = y,   Q_(k+1) = (eps*y - k) Q_k + Q_k' psi.

A metric induced by the space form of sign eps has every Q_k >= 0 on
(y_inf, y_sup); at an origin-defined potential the converse holds as well.
Everything here runs on truncated series about y_inf with exact rational
coefficients when the profile is rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from ._rational import is_exact, render
from .series import DEFAULT_ORDER, SeriesError, TruncatedSeries
from .soliton import OriginConditionError, PsiProfile, SolitonError, psi_origin_series

NUMERIC_TOL = 1e-9
FLOAT_COEFF_TOL = 1e-10

EPSILONS = (-1, 0, 1)


class ImmersionError(ValueError):
    pass


def as_epsilon(eps) -> int:
    if isinstance(eps, str):
        eps = int(eps.replace("+", ""))
    if eps not in EPSILONS or isinstance(eps, bool):
        raise ImmersionError(f"epsilon must be -1, 0 or 1, got {eps!r}")
    return int(eps)


def _check_origin_series(psi: TruncatedSeries):
    if psi.base_point != 0:
        raise ImmersionError(f"the criterion runs about y = 0; series is about {psi.base_point}")
    if psi[0] != 0:
        raise ImmersionError(f"psi must vanish at the origin, constant term is {psi[0]}")
    if psi.order < 1:
        raise ImmersionError("psi needs order >= 1")


def _q_about_base(psi: TruncatedSeries, eps: int, K: int) -> List[TruncatedSeries]:
    """Q_1..Q_K about psi's base point b; needs psi(b) = 0.

    Writing psi = (y - b) phi, the product Q_k' psi is formed as
    shift_up(Q_k' phi), which keeps every Q_k at psi's order.
    """
    if K < 1:
        raise ImmersionError("K must be >= 1")
    if psi[0] != 0:
        raise ImmersionError("psi must vanish at the expansion point")
    eps = as_epsilon(eps)
    b = psi.base_point
    N = psi.order
    phi = psi.shift_down()
    q = TruncatedSeries.variable(N, b, psi.domain)
    out = [q]
    for k in range(1, K):
        lin = q * (eps * b - k)
        if eps:
            lin = lin + q.shift_up().truncate(N) * eps
        q = lin + (q.derivative() * phi).shift_up()
        out.append(q)
    return out


def q_recursion(psi: TruncatedSeries, eps, K: int) -> List[TruncatedSeries]:
    """Q_1..Q_K for a profile series psi = a_1 y + a_2 y^2 + ... about 0."""
    _check_origin_series(psi)
    return _q_about_base(psi, eps, K)


def f_recursion(psi: TruncatedSeries, K: int) -> List[TruncatedSeries]:
    """F_1 = psi, F_(k+1) = F_k' psi - k F_k, so that y^(k)(r) = F_k(y(r)) / r^k."""
    _check_origin_series(psi)
    if K < 1:
        raise ImmersionError("K must be >= 1")
    phi = psi.shift_down()
    f = psi
    out = [f]
    for k in range(1, K):
        f = (f.derivative() * phi).shift_up() - f * k
        out.append(f)
    return out


def f_orders_ok(fs: Sequence[TruncatedSeries]) -> List[bool]:
    """Whether each F_k is O(y^k), i.e. its coefficients below index k vanish."""
    return [all(c == 0 for c in f.coeffs[:k]) for k, f in enumerate(fs, start=1)]


@dataclass(frozen=True)
class Violation:
    k: int
    index: int
    value: object

    def to_json(self):
        return {"k": self.k, "index": self.index, "value": render(self.value)}


@dataclass(frozen=True)
class ImmersibilityCertificate:
    epsilon: int
    K: int
    order: int
    per_k_min: tuple
    verdict: str
    first_violation: Optional[Violation]
    regime: str
    criterion: str = "coefficients"
    scope: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict == "certified_to_K"

    def to_json(self) -> dict:
        d = {
            "epsilon": self.epsilon,
            "K": self.K,
            "verdict": self.verdict,
            "per_k_min": [{"k": k, "min": render(v), "index": i} for k, v, i in self.per_k_min],
            "regime": self.regime,
            "criterion": self.criterion,
            "series_order": self.order,
            "scope": self.scope,
        }
        if self.first_violation is not None:
            d["first_violation"] = self.first_violation.to_json()
        return d


_SCOPE = {
    "coefficients": ("every Taylor coefficient of Q_1..Q_K about y=0 through order {N} is >= 0; "
                     "an order-K check, not a proof for all k"),
    "local": ("the lowest nonzero coefficient of each of Q_1..Q_K about y=0 is > 0, so each is >= 0 "
              "on a right neighbourhood of 0; an order-K check, not a proof for all k"),
}


def certify(psi: TruncatedSeries, eps, K: int = 20, criterion: str = "coefficients",
            qs: Optional[Sequence[TruncatedSeries]] = None) -> ImmersibilityCertificate:
    """Check non-negativity of Q_1..Q_K for an origin profile series.

    ``criterion="coefficients"`` demands every known coefficient be >= 0.
    ``criterion="local"`` demands the lowest nonzero coefficient be > 0
    (each Q_k is then non-negative just to the right of the origin).
    Exact series give a tolerance-free verdict; float series at most
    ``numeric_evidence``.  ``qs`` reuses an already computed q_recursion.
    """
    eps = as_epsilon(eps)
    if criterion not in _SCOPE:
        raise ImmersionError(f"unknown criterion {criterion!r}")
    _check_origin_series(psi)
    if psi.order < K:
        raise ImmersionError(f"series order {psi.order} cannot resolve Q_{K} = O(y^{K}); use order >= K")
    if qs is None:
        qs = q_recursion(psi, eps, K)
    exact = psi.domain.is_exact
    per_k = []
    first = None
    for k, q in enumerate(qs, start=1):
        coeffs = q.coeffs
        scale = max((abs(float(c)) for c in coeffs), default=0.0)
        tol = 0 if exact else FLOAT_COEFF_TOL * max(scale, 1.0)
        if criterion == "coefficients":
            nz = [(c, i) for i, c in enumerate(coeffs) if c != 0]
            value, index = min(nz, key=lambda t: (t[0], t[1])) if nz else (coeffs[0], 0)
            bad = next(((i, c) for i, c in enumerate(coeffs) if c < -tol), None)
        else:
            v = next((i for i, c in enumerate(coeffs) if abs(c) > tol), None)
            if v is None:
                value, index, bad = coeffs[0] * 0, None, None
            else:
                value, index = coeffs[v], v
                bad = (v, coeffs[v]) if coeffs[v] < 0 else None
        per_k.append((k, value if exact else float(value), index))
        if bad is not None and first is None:
            first = Violation(k, bad[0], bad[1] if exact else float(bad[1]))
    if first is not None:
        verdict = "violated"
    else:
        verdict = "certified_to_K" if exact else "numeric_evidence"
    regime = "exact" if exact else f"float(tol={FLOAT_COEFF_TOL:g})"
    return ImmersibilityCertificate(eps, K, psi.order, tuple(per_k), verdict, first, regime, criterion,
                                    _SCOPE[criterion].format(N=psi.order))


def default_series_order(K: int) -> int:
    return max(DEFAULT_ORDER, 2 * K)


def certify_params(params, eps, K: int = 20, order: Optional[int] = None,
                   criterion: str = "coefficients") -> ImmersibilityCertificate:
    psi = psi_origin_series(params, order or default_series_order(K))
    return certify(psi, eps, K, criterion)


# ---------------------------------------------------------------------------
# Q_k^0(y(r)) = r^k f^(k)(r)


@dataclass(frozen=True)
class QFCheck:
    passed: bool
    max_rel_error: float
    rows: tuple  # (k, r, Q_k(y(r)), r^k f^(k)(r), rel_error)


def q_equals_rkfk_check(psi, K: int = 5, r_values=(0.05, 0.1), rtol: float = 1e-6,
                        detailed: bool = False):
    """Numerically confirm Q_k^0(y(r)) = r^k f^(k)(r) for k <= K.

    ``psi`` is an origin-defined PsiProfile or an origin series; f is
    reconstructed by integrating the profile ODE and its derivatives are
    taken numerically (Cauchy integrals over circles around each r).
    """
    from .geometry import potential_derivatives  # deferred: keeps scipy off the exact path
    from .soliton import series_profile

    if isinstance(psi, TruncatedSeries):
        profile = series_profile(psi)
        series = psi
    else:
        profile = psi
        series = profile.local_series(0, max(DEFAULT_ORDER, 2 * K))
    qs = q_recursion(series, 0, K)
    rows = []
    worst = 0.0
    for r in r_values:
        ders, y_r = potential_derivatives(profile, r, K)
        for k in range(1, K + 1):
            lhs = float(qs[k - 1].eval(y_r))
            rhs = r**k * ders[k]
            err = abs(lhs - rhs) / max(abs(rhs), 1e-300)
            worst = max(worst, err)
            rows.append((k, r, lhs, rhs, err))
    res = QFCheck(worst < rtol, worst, tuple(rows))
    return res if detailed else res.passed


# ---------------------------------------------------------------------------
# necessary conditions for projectively induced radial KRS (n >= 2)


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # pass | fail | vacuous | undecidable
    value: object
    regime: str  # exact | numeric

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "vacuous")

    def to_json(self):
        v = self.value
        if isinstance(v, (list, tuple)):
            v = [render(x) if not isinstance(x, (list, tuple, dict, str)) else x for x in v]
        elif v is not None and not isinstance(v, (str, bool, dict)):
            v = render(v)
        return {"name": self.name, "status": self.status, "value": v, "regime": self.regime}


@dataclass(frozen=True)
class NecessaryConditionsReport:
    h: object
    checks: tuple
    q_values: tuple = ()  # (k+1, Q_(k+1)(h), product) for k = 1..K
    q_dot: Optional[tuple] = None  # (Q'_(h+1)(h), product)
    notes: tuple = ()

    def check(self, name) -> Check:
        return next(c for c in self.checks if c.name == name)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failed(self) -> List[str]:
        return [c.name for c in self.checks if c.status == "fail"]

    def to_json(self) -> dict:
        d = {
            "h": render(self.h),
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            "notes": list(self.notes),
        }
        if self.q_values:
            d["product_formula"] = [{"k+1": j, "Q(h)": render(q), "product": render(p)}
                                    for j, q, p in self.q_values]
        if self.q_dot is not None:
            d["qdot_h_plus_1"] = {"value": render(self.q_dot[0]), "product": render(self.q_dot[1])}
        return d


def _is_integer(x):
    if is_exact(x):
        return Fraction(x).denominator == 1, "exact"
    return abs(x - round(x)) <= NUMERIC_TOL, "numeric"


def falling_product(h, k):
    """(h - k)(h - k + 1)...(h - 1) h."""
    p = Fraction(1) if is_exact(h) else 1.0
    for j in range(k + 1):
        p *= h - j
    return p


def rising_product(h: int, d):
    """(h + d)(h - 1 + d)...(1 + d)."""
    p = Fraction(1) if is_exact(d) else 1.0
    for j in range(1, h + 1):
        p *= j + d
    return p


def _zero_bracket(profile: PsiProfile, h, width=Fraction(1, 10**6)):
    """Independent check that psi changes sign or vanishes at h (rational probes)."""
    if not is_exact(h):
        return None
    h = Fraction(h)
    s_here = profile.sign(h)
    if s_here == 0:
        return True
    lo = h - width if h - width > 0 else h / 2
    s_lo, s_hi = profile.sign(lo), profile.sign(h + width)
    return s_lo * s_hi < 0


def necessary_conditions(profile: PsiProfile, K: int = 8) -> NecessaryConditionsReport:
    """Necessary conditions for a radial KRS (n >= 2) to be projectively induced.

    h = y_inf.  Checks: (i) psi(h) = 0, (ii) h a natural number, (iii)
    psi'(h) an integer, (iv) lam rational when h != 0.  When (i) and (ii)
    hold and exact local data exist, Q_(k+1)(h) (eps = +1) is compared to
    the falling product and Q'_(h+1)(h) to the product in psi'(h).
    """
    n = profile.dim
    if n is None:
        raise ImmersionError("profile must declare its complex dimension n")
    if n < 2:
        raise ImmersionError("the necessary conditions are stated for n >= 2")
    h = profile.y_inf
    lam = profile.solitonic_constant
    notes = []
    checks = []

    psi_h = profile.value_exact(h) if is_exact(h) else None
    if psi_h is not None:
        c1 = Check("i", "pass" if psi_h == 0 else "fail", psi_h, "exact")
    else:
        try:
            v = profile.value(h)
        except (SolitonError, ZeroDivisionError):
            v = math.inf
        ok = abs(v) <= NUMERIC_TOL * max(1.0, abs(float(h)))
        c1 = Check("i", "pass" if ok else "fail", v, "numeric")
        psi_h = 0 if ok else v
    checks.append(c1)
    bracket = _zero_bracket(profile, h)
    if bracket is not None:
        notes.append(f"bisection probe around h: psi {'vanishes/changes sign' if bracket else 'keeps sign'}")
    if profile.continuity == "unverifiable":
        notes.append("continuity of psi at y_inf is unverifiable for a series profile")
    if c1.status == "fail":
        notes.append("psi(h) != 0: if psi is continuous at h this forces h = 0")
    if h != 0:
        notes.append("h > 0: non-negativity of the Q_k is necessary only here; no converse applies")

    is_nat, reg = _is_integer(h)
    is_nat = is_nat and h >= 0
    checks.append(Check("ii", "pass" if is_nat else "fail", h, reg))

    if c1.status == "pass":
        if profile.poly is not None or profile.series is not None:
            dpsi = profile.dpsi(h)
        elif h == 0:
            dpsi = profile.dpsi(0)
        else:
            dpsi = n - lam * h
    else:
        try:
            dpsi = profile.dpsi(h)
        except (SolitonError, ZeroDivisionError):
            dpsi = None
    if dpsi is None:
        checks.append(Check("iii", "undecidable", None, "numeric"))
    else:
        ok, reg = _is_integer(dpsi)
        checks.append(Check("iii", "pass" if ok else "fail", dpsi, reg))

    if h == 0:
        checks.append(Check("iv", "vacuous", lam, "exact"))
    elif lam is None:
        checks.append(Check("iv", "undecidable", None, "exact"))
    elif is_exact(lam):
        checks.append(Check("iv", "pass", lam, "exact"))
    else:
        checks.append(Check("iv", "undecidable", lam, "numeric"))

    q_values = ()
    q_dot = None
    if c1.status == "pass" and is_nat and is_exact(h):
        try:
            local = profile.local_series(h, K + 3)
        except (SolitonError, SeriesError, OriginConditionError) as exc:
            local = None
            notes.append(f"no exact local series at h: {exc}")
        if local is not None and local.domain.is_exact:
            H = int(h)
            depth = max(K + 1, H + 1)
            if local.order < depth + 1:
                local = profile.local_series(h, depth + 2)
            qs = _q_about_base(local, 1, depth)
            q_values = tuple((k + 1, qs[k][0], falling_product(Fraction(h), k)) for k in range(1, K + 1))
            d = local[1]
            q_dot = (qs[H][1], rising_product(H, d))
            ok = all(q == p for _, q, p in q_values) and q_dot[0] == q_dot[1]
            notes.append("product formulas " + ("hold exactly" if ok else "DO NOT hold"))
    return NecessaryConditionsReport(h, tuple(checks), q_values, q_dot, tuple(notes))

