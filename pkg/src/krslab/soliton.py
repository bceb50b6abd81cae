"""Radial Kähler–Ricci soliton profiles psi(y).

A radial KRS with solitonic constant ``lam`` in complex dimension ``n`` is
fixed by ``(mu, nu)`` (plus an integration constant ``k1`` when n = 1).  The
profile solves

    n = 1:   psi' = mu*psi + k1 + 1 - lam*y
    n >= 2:  psi' = (mu - (n-1)/y)*psi + n - lam*y

and for mu != 0 has the closed forms

    n = 1:   nu*e^(mu y) + (lam/mu) y + lam/mu^2 - (k1+1)/mu
    n >= 2:  nu*e^(mu y)/y^(n-1) + (lam/mu) y
             + (lam-mu)/mu^(n+1) * sum_{j<n} n!/j! mu^j y^(j+1-n).

The potential extends over the origin exactly when
``nu = n! (mu - lam) / mu^(n+1)`` (with k1 = 0 when n = 1); the profile is
then ``y + sum_{k>=1} nu mu^(n+k)/(n+k)! y^(k+1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable, Optional, Sequence

import mpmath

from ._rational import Number, is_exact, render, to_number
from .series import DEFAULT_ORDER, EXACT, TruncatedSeries, float_domain, recenter_polynomial

FLOAT_RTOL = 1e-10


class SolitonError(ValueError):
    pass


class PoleError(SolitonError):
    """psi' requested at y = 0 for n >= 2, where the ODE has a pole."""


class DomainError(SolitonError):
    pass


class RouteToKEError(SolitonError):
    """mu = 0: the soliton is Kähler–Einstein and has no exponential closed form."""


class OriginConditionError(SolitonError):
    """The origin condition nu = n!(mu - lam)/mu^(n+1) does not hold."""


class MetricDegeneracyError(SolitonError):
    """psi <= 0 where a metric needs psi > 0."""


@dataclass(frozen=True)
class SolitonParams:
    n: int
    lam: Number
    mu: Number
    nu: Number
    k1: Optional[Number] = None

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise SolitonError(f"complex dimension must be an integer >= 1, got {self.n!r}")
        if (self.n == 1) != (self.k1 is not None):
            raise SolitonError("k1 must be given exactly when n = 1")
        for name in ("lam", "mu", "nu", "k1"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, to_number(v))

    @property
    def exact(self) -> bool:
        return all(is_exact(v) for v in (self.lam, self.mu, self.nu, self.k1) if v is not None)

    @property
    def k(self):
        return self.k1 if self.k1 is not None else Fraction(0)

    def origin_nu(self):
        """The value of nu making the potential defined at the origin."""
        if self.mu == 0:
            raise RouteToKEError("origin value of nu is undefined for mu = 0")
        return factorial(self.n) * (self.mu - self.lam) / self.mu ** (self.n + 1)

    def replace(self, **kw) -> "SolitonParams":
        d = dict(n=self.n, lam=self.lam, mu=self.mu, nu=self.nu, k1=self.k1)
        d.update(kw)
        return SolitonParams(**d)

    def to_json(self) -> dict:
        d = {"n": self.n, "lambda": render(self.lam), "mu": render(self.mu), "nu": render(self.nu)}
        if self.k1 is not None:
            d["k1"] = render(self.k1)
        return d

    @classmethod
    def from_json(cls, obj) -> "SolitonParams":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict):
            raise SolitonError("parameters must be a JSON object")
        unknown = set(obj) - {"n", "lambda", "mu", "nu", "k1"}
        if unknown:
            raise SolitonError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {"n", "lambda", "mu", "nu"} - set(obj)
        if missing:
            raise SolitonError(f"missing parameter keys: {sorted(missing)}")
        n = obj["n"]
        if isinstance(n, str):
            n = int(n)
        try:
            return cls(n=n, lam=obj["lambda"], mu=obj["mu"], nu=obj["nu"], k1=obj.get("k1"))
        except (TypeError, ValueError) as exc:
            raise SolitonError(str(exc)) from exc


def _close(a, b, rtol=FLOAT_RTOL) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300) or a == b


def psi_ode_rhs(params: SolitonParams, psi, y):
    """psi'(y) given the value psi at y."""
    n, lam, mu = params.n, params.lam, params.mu
    if n == 1:
        return mu * psi + params.k + 1 - lam * y
    if y == 0:
        raise PoleError("the profile ODE has a pole at y = 0 for n >= 2")
    if is_exact(y) and is_exact(psi) and params.exact:
        y = Fraction(y)
    return (mu - Fraction(n - 1) / y if isinstance(y, Fraction) else mu - (n - 1) / y) * psi + n - lam * y


def _tail_exp(x: float, n: int) -> float:
    """e^x - sum_{m<=n} x^m/m!, without cancellation for small |x|."""
    if abs(x) < 2.0:
        term = x ** (n + 1) / factorial(n + 1)
        total = 0.0
        m = n + 1
        while True:
            total += term
            m += 1
            term *= x / m
            if abs(term) <= 1e-18 * abs(total) or m > n + 80:
                return total
    if x > 709.0:
        return math.inf
    return math.exp(x) - sum(x**m / factorial(m) for m in range(n + 1))


def _rational_part(params: SolitonParams, y):
    """Closed form minus its exponential term."""
    n, lam, mu = params.n, params.lam, params.mu
    if n == 1:
        return lam / mu * y + (lam / mu**2 - (params.k + 1) / mu)
    s = sum(Fraction(factorial(n), factorial(j)) * mu**j * y ** (j + 1 - n) for j in range(n))
    return lam / mu * y + (lam - mu) / mu ** (1 + n) * s


def psi_closed_form(params: SolitonParams, y):
    """Evaluate the closed-form profile at ``y``.

    The value is exact (a Fraction) when all inputs are rational and the
    exponential term is absent; otherwise a float.
    """
    if params.mu == 0:
        raise RouteToKEError("mu = 0 is Kähler–Einstein; use classify / ke_closed_form")
    n = params.n
    if n >= 2 and y <= 0:
        raise DomainError(f"closed form for n >= 2 needs y > 0, got {y}")
    y = to_number(y)
    if params.exact and is_exact(y) and (params.nu == 0):
        return Fraction(_rational_part(params, y))
    if params.exact and is_exact(y):
        with mpmath.workdps(40):
            v = _closed_form_mp(params, y)
        return float(v)
    return _psi_float(params, float(y))


def _closed_form_mp(params: SolitonParams, y):
    """Closed form in mpmath at current precision, via the cancellation-free split."""
    n = params.n
    mu = _mpf(params.mu)
    nu = _mpf(params.nu)
    yy = _mpf(y)
    nu0 = _mpf(params.origin_nu()) if n >= 1 else 0
    x = mu * yy
    tail = mpmath.exp(x) - mpmath.fsum(x**m / mpmath.factorial(m) for m in range(n + 1))
    v = yy + nu0 * tail / yy ** (n - 1) + (nu - nu0) * mpmath.exp(x) / yy ** (n - 1)
    if n == 1:
        v -= _mpf(params.k) / mu
    return v


def _mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _psi_float(params: SolitonParams, y: float) -> float:
    n = params.n
    mu = float(params.mu)
    nu = float(params.nu)
    nu0 = float(params.origin_nu())
    x = mu * y
    ypow = y ** (n - 1)
    v = y + (nu0 * _tail_exp(x, n) / ypow if nu0 != 0 else 0.0)
    dnu = nu - nu0
    if dnu != 0:
        v += dnu * (math.exp(x) if x <= 709.0 else math.inf) / ypow
    if n == 1:
        v -= float(params.k) / mu
    return v


def psi_interval(params: SolitonParams, y: Fraction, prec: int = 80):
    """Rigorous enclosure of psi(y) at a rational point (mpmath interval arithmetic)."""
    iv = mpmath.iv
    old = iv.prec
    iv.prec = prec
    try:
        def I(q):
            q = Fraction(q)
            return iv.mpf(q.numerator) / q.denominator
        n = params.n
        mu, nu, yy = I(params.mu), I(params.nu), I(y)
        v = nu * iv.exp(mu * yy) / yy ** (n - 1)
        if n == 1:
            v = nu * iv.exp(mu * yy)
        v += I(_rational_part(params, Fraction(y)))
        return v
    finally:
        iv.prec = old


def psi_sign(params: SolitonParams, y) -> int:
    """Sign of psi(y), decided exactly for rational data.

    Rational inputs are enclosed by interval arithmetic with increasing
    precision until the sign is certain; an exact zero is only reported when
    the exponential term is absent or the enclosure collapses on zero.
    """
    if params.exact and is_exact(y):
        y = Fraction(y)
        if params.nu == 0:
            v = psi_closed_form(params, y)
            return (v > 0) - (v < 0)
        for prec in (80, 160, 320, 640, 1280, 2560):
            v = psi_interval(params, y, prec)
            if v.a > 0:
                return 1
            if v.b < 0:
                return -1
        return 0
    v = psi_closed_form(params, y)
    return (v > 0) - (v < 0)


def ke_closed_form(params: SolitonParams, y, c):
    """mu = 0 (Kähler–Einstein) profiles with integration constant ``c``.

    Exposed for context only; nothing downstream certifies these.
    """
    n, lam = params.n, params.lam
    if params.mu != 0:
        raise SolitonError("ke_closed_form applies only when mu = 0")
    if n == 1:
        return -lam * y * y / 2 + (params.k + 1) * y + c
    return y + (params.nu + c) / y ** (n - 1) - lam * y * y / (n + 1)


def origin_condition(params: SolitonParams) -> bool:
    """Whether the potential is defined at r = 0.

    Exact comparison for rational parameters, relative tolerance
    ``FLOAT_RTOL`` otherwise.  For n = 1 it additionally needs k1 = 0: only
    then does psi start as y + O(y^2).
    """
    if params.mu == 0:
        raise RouteToKEError("the origin condition needs mu != 0")
    if params.n == 1 and not _close(params.k, 0):
        return False
    return _close(params.nu, params.origin_nu())


def psi_origin_series(params: SolitonParams, K: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Taylor series of psi about y = 0 for origin-defined parameters.

    Coefficients: a_0 = 0, a_1 = 1, a_(k+1) = nu mu^(n+k) / (n+k)!.
    """
    if params.mu == 0:
        raise RouteToKEError("the origin series needs mu != 0")
    if not origin_condition(params):
        raise OriginConditionError(
            "origin condition nu = n!(mu - lambda)/mu^(n+1) fails"
            + (" (or k1 != 0)" if params.n == 1 else "")
            + f": nu = {params.nu}, required {params.origin_nu()}")
    if K < 1:
        raise SolitonError("origin series needs K >= 1")
    n = params.n
    if params.exact:
        nu, mu, domain = params.nu, params.mu, EXACT
        coeffs = [Fraction(0), Fraction(1)]
        coeffs += [nu * mu ** (n + k) / factorial(n + k) for k in range(1, K)]
    else:
        domain = float_domain()
        nu, mu = float(params.nu), float(params.mu)
        coeffs = [0.0, 1.0] + [nu * mu ** (n + k) / factorial(n + k) for k in range(1, K)]
    return TruncatedSeries(tuple(coeffs), Fraction(0), domain)


@dataclass(frozen=True)
class Classification:
    verdict: str
    reason: str
    positive: Optional[bool] = None

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "reason": self.reason, "positive": self.positive}


def classify(params: SolitonParams) -> Classification:
    """trivial_KE when mu = 0; flat when nu = 0 (and mu = lam for n >= 2);
    nontrivial otherwise.  ``positive`` records whether psi > 0 somewhere on
    (0, oo), i.e. whether the data describe a metric at all."""
    if params.mu == 0:
        return Classification("trivial_KE", "mu=0", None)
    if params.n == 1 and _close(params.nu, 0):
        verdict, reason = "flat", "n=1,nu=0"
    elif params.n >= 2 and _close(params.nu, 0) and _close(params.mu, params.lam):
        verdict, reason = "flat", "n>=2,nu=0,mu=lambda"
    else:
        verdict, reason = "nontrivial", "mu!=0,not_flat"
    try:
        detect_domain(params)
        positive = True
    except MetricDegeneracyError:
        positive = False
    return Classification(verdict, reason, positive)


# ---------------------------------------------------------------------------
# profiles


def _probe_points(lo_exp: int = -20, hi_exp: int = 20, per_octave: int = 4):
    pts = []
    for e in range(lo_exp, hi_exp):
        base = Fraction(2) ** e
        for j in range(per_octave):
            pts.append(base * (per_octave + j) / per_octave)
    pts.append(Fraction(2) ** hi_exp)
    return pts


def _bisect(sign: Callable, lo, hi, s_lo: int, iters: int = 80):
    for _ in range(iters):
        mid = (lo + hi) / 2
        s = sign(mid)
        if s == 0:
            return mid, mid
        if s == s_lo:
            lo = mid
        else:
            hi = mid
        if hi - lo <= abs(hi) * Fraction(1, 2**60):
            break
    return lo, hi


def detect_domain(params: SolitonParams, y_inf=None):
    """(y_inf, y_sup) of the positivity interval of the closed-form profile.

    Signs are checked exactly at rational probes spread geometrically over
    [2^-20, 2^20]; the first zero above y_inf is refined by bisection and
    caps the domain.  Zeros between probes are not detected.
    """
    origin = origin_condition(params)
    sign = lambda y: psi_sign(params, y)
    pts = _probe_points()
    if y_inf is None:
        if origin:
            y_inf = Fraction(0)
        else:
            signs = [(p, sign(p)) for p in pts]
            if signs[0][1] > 0:
                y_inf = Fraction(0)
            else:
                y_inf = None
                for (p0, s0), (p1, s1) in zip(signs, signs[1:]):
                    if s0 <= 0 < s1:
                        lo, hi = _bisect(sign, p0, p1, s0 if s0 else -1)
                        y_inf = _root_value(lo, hi)
                        break
                if y_inf is None:
                    raise MetricDegeneracyError("psi <= 0 at every probe in (0, 2^20]: not a metric")
    y_inf_val = Fraction(y_inf) if is_exact(y_inf) else y_inf
    above = [p for p in pts if p > y_inf_val]
    prev = None
    for p in above:
        s = sign(p)
        if prev is None:
            if s <= 0:
                raise MetricDegeneracyError(f"psi <= 0 just above y_inf = {y_inf} (at y = {float(p):.6g})")
            prev = (p, s)
            continue
        if s <= 0:
            if s == 0:
                return y_inf_val, p
            lo, hi = _bisect(sign, prev[0], p, 1)
            return y_inf_val, _root_value(lo, hi)
        prev = (p, s)
    return y_inf_val, math.inf


def _root_value(lo, hi):
    if lo == hi:
        return lo
    return float((lo + hi) / 2)


@dataclass(frozen=True)
class PsiProfile:
    """A profile psi(y) with its positivity domain (y_inf, y_sup).

    Exactly one source is set: ``params`` (closed form, with ``origin_series``
    when origin-defined) or ``poly`` (an exact polynomial in y, optionally
    tagged with ``n`` and ``lam`` of the soliton it is meant to represent) or
    ``series`` (a truncated series taken at face value).
    """

    params: Optional[SolitonParams]
    y_inf: Number
    y_sup: Number
    origin_series: Optional[TruncatedSeries] = None
    poly: Optional[tuple] = None
    series: Optional[TruncatedSeries] = None
    n: Optional[int] = None
    lam: Optional[Number] = None
    continuity: str = "closed_form"

    @property
    def origin_defined(self) -> bool:
        if self.params is not None:
            return self.origin_series is not None
        if self.y_inf != 0:
            return False
        if self.series is not None and self.series.base_point != 0:
            return False
        c = self.poly if self.poly is not None else self.series.coeffs
        return len(c) > 1 and c[0] == 0 and c[1] == 1

    @property
    def dim(self) -> Optional[int]:
        return self.params.n if self.params is not None else self.n

    @property
    def solitonic_constant(self):
        return self.params.lam if self.params is not None else self.lam

    def __call__(self, y) -> float:
        return self.psi(y)

    def psi(self, y) -> float:
        """Float value of psi at y, accurate near the origin."""
        if self.poly is not None:
            acc = 0.0
            for c in reversed(self.poly):
                acc = acc * float(y) + float(c)
            return acc
        if self.series is not None:
            return float(self.series.eval(float(y)))
        return _psi_float(self.params, float(y))

    def value_exact(self, y):
        """Exact value where available (polynomials, exponential-free closed forms), else None."""
        if not is_exact(y):
            return None
        y = Fraction(y)
        if self.poly is not None:
            acc = Fraction(0)
            for c in reversed(self.poly):
                acc = acc * y + c
            return acc
        if self.series is not None:
            return self.series.eval(y) if self.series.domain.is_exact else None
        p = self.params
        if p.exact and (p.nu == 0 or (p.n == 1 and p.mu * y == 0)):
            if p.n >= 2 and y == 0:
                return Fraction(0) if origin_condition(p) else None
            return Fraction(_rational_part(p, y) + p.nu)
        if p.exact and origin_condition(p) and y == 0:
            return Fraction(0)
        return None

    def value(self, y):
        v = self.value_exact(y)
        return v if v is not None else self.psi(y)

    def dpsi(self, y):
        """psi'(y): exact for polynomials, via the profile ODE otherwise."""
        if self.poly is not None:
            return _poly_eval([c * i for i, c in enumerate(self.poly)][1:] or [Fraction(0)], y)
        if self.series is not None:
            return self.series.derivative().eval(y)
        p = self.params
        if y == 0 and self.origin_series is not None:
            return self.origin_series[1]
        return psi_ode_rhs(p, self.value(y), y)

    def sign(self, y) -> int:
        v = self.value_exact(y)
        if v is not None:
            return (v > 0) - (v < 0)
        if self.params is not None:
            return psi_sign(self.params, y)
        v = self.psi(y)
        return (v > 0) - (v < 0)

    def local_series(self, base, order: int) -> TruncatedSeries:
        """Exact Taylor series of psi about ``base`` when it can be formed.

        Origin series at 0; Taylor shift for polynomials; for closed forms
        about a zero h > 0 the coefficients follow from the linear ODE
        y psi' = (mu y - (n-1)) psi + n y - lam y^2 with psi(h) = 0.
        """
        base = Fraction(base)
        if self.poly is not None:
            return recenter_polynomial(self.poly, base, order)
        if self.series is not None:
            if self.series.base_point != base:
                raise SolitonError("a series profile is only known about its own base point")
            return self.series.truncate(min(order, self.series.order))
        if base == 0:
            if self.origin_series is None:
                raise OriginConditionError("profile is not origin-defined")
            s = self.origin_series
            if s.order < order:
                s = psi_origin_series(self.params, order)
            return s.truncate(order)
        return _ode_series_at_zero(self.params, base, order)

    def to_json(self) -> dict:
        d = {"y_inf": render(self.y_inf), "y_sup": render(self.y_sup), "continuity": self.continuity}
        if self.params is not None:
            d["params"] = self.params.to_json()
            d["origin_defined"] = self.origin_series is not None
        if self.poly is not None:
            d["poly"] = [render(c) for c in self.poly]
        return d


def _poly_eval(coeffs, y):
    acc = Fraction(0) if is_exact(y) else 0.0
    for c in reversed(coeffs):
        acc = acc * y + (c if is_exact(y) else float(c))
    return acc


def _ode_series_at_zero(params: SolitonParams, h: Fraction, order: int) -> TruncatedSeries:
    """Taylor coefficients of psi about a zero h > 0 of psi (n >= 2, exact data)."""
    if params.n < 2:
        raise SolitonError("ODE expansion about a zero is implemented for n >= 2")
    if not params.exact:
        raise SolitonError("exact Taylor data about h need rational parameters")
    if h <= 0:
        raise SolitonError("expansion point must be positive")
    n, mu, lam = params.n, params.mu, params.lam
    # (h + x) sum (m+1) c_{m+1} x^m = (mu h - (n-1) + mu x) sum c_m x^m + n(h + x) - lam (h + x)^2
    rhs_poly = [n * h - lam * h * h, n - 2 * lam * h, -lam]
    c = [Fraction(0)]
    for m in range(order):
        r = (mu * h - (n - 1)) * c[m] + (mu * c[m - 1] if m >= 1 else 0)
        r += rhs_poly[m] if m < 3 else 0
        r -= m * c[m]
        c.append(r / (h * (m + 1)))
    return TruncatedSeries(tuple(c), h, EXACT)


def make_profile(params: SolitonParams, K: int = DEFAULT_ORDER, y_inf=None, y_sup=None) -> PsiProfile:
    """Profile of the closed-form soliton with detected or declared domain."""
    if params.mu == 0:
        raise RouteToKEError("mu = 0 profiles are Kähler–Einstein; not constructed here")
    series = psi_origin_series(params, K) if origin_condition(params) else None
    if y_inf is None or y_sup is None:
        lo, hi = detect_domain(params, y_inf)
        y_inf = lo if y_inf is None else y_inf
        y_sup = hi if y_sup is None else y_sup
    return PsiProfile(params=params, y_inf=y_inf, y_sup=y_sup, origin_series=series)


def polynomial_profile(coeffs: Sequence, y_inf=0, y_sup=math.inf, n: Optional[int] = None,
                       lam=None) -> PsiProfile:
    """A profile given by an exact polynomial psi(y) = sum c_i y^i."""
    c = tuple(Fraction(to_number(x)) if is_exact(to_number(x)) else to_number(x) for x in coeffs)
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    if not all(is_exact(x) for x in c):
        raise SolitonError("polynomial profiles need rational coefficients")
    y_inf = to_number(y_inf)
    if y_sup != math.inf:
        y_sup = to_number(y_sup)
    return PsiProfile(params=None, y_inf=y_inf, y_sup=y_sup, poly=c, n=n,
                      lam=None if lam is None else to_number(lam), continuity="verified")


def series_profile(series: TruncatedSeries, y_inf=0, y_sup=math.inf, n=None, lam=None) -> PsiProfile:
    """A profile known only through a truncated series; continuity at y_inf is unverifiable."""
    return PsiProfile(params=None, y_inf=y_inf, y_sup=y_sup, series=series, n=n,
                      lam=None if lam is None else to_number(lam), continuity="unverifiable")


def profile_series(profile: PsiProfile, order: int) -> TruncatedSeries:
    """Origin series of a profile, for the recursions that run about y = 0."""
    return profile.local_series(0, order)
