"""Truncated power series in one variable with exact or fixed-precision coefficients.

A :class:`TruncatedSeries` of order ``K`` stores ``a_0 .. a_K`` of

    a_0 + a_1 (y - y0) + ... + a_K (y - y0)^K + O((y - y0)^(K+1))

about a rational base point ``y0``.  Coefficients live in one of two domains:
``exact`` (:class:`fractions.Fraction`) or ``float(bits)`` (``mpmath.mpf`` at
that working precision).  Domains never mix inside one series or one
operation; binary operations truncate to the smaller order and never pad.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Iterable, Sequence

import mpmath

from ._rational import is_exact

DEFAULT_ORDER = 32


class SeriesError(ValueError):
    """Raised on incompatible operands or invalid series operations."""


@dataclass(frozen=True)
class Domain:
    kind: str
    bits: int | None = None

    def __post_init__(self):
        if self.kind == "exact":
            if self.bits is not None:
                raise SeriesError("exact domain carries no precision")
        elif self.kind == "float":
            if not isinstance(self.bits, int) or self.bits < 2:
                raise SeriesError(f"float domain needs a precision in bits, got {self.bits!r}")
        else:
            raise SeriesError(f"unknown coefficient domain {self.kind!r}")

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"

    def convert(self, x):
        if self.is_exact:
            if not is_exact(x):
                raise SeriesError(f"exact domain cannot hold {x!r}")
            return Fraction(x)
        with mpmath.workprec(self.bits):
            if isinstance(x, Fraction):
                return mpmath.mpf(x.numerator) / x.denominator
            return mpmath.mpf(x)

    def __str__(self):
        return "exact" if self.is_exact else f"float({self.bits})"


EXACT = Domain("exact")


def float_domain(bits: int = 53) -> Domain:
    return Domain("float", bits)


class _Ctx:
    """Working-precision context for a domain (a no-op for exact)."""

    def __init__(self, domain: Domain):
        self._wp = None if domain.is_exact else mpmath.workprec(domain.bits)

    def __enter__(self):
        if self._wp is not None:
            self._wp.__enter__()

    def __exit__(self, *exc):
        if self._wp is not None:
            return self._wp.__exit__(*exc)
        return False


@dataclass(frozen=True)
class TruncatedSeries:
    coeffs: tuple
    base_point: Fraction = Fraction(0)
    domain: Domain = EXACT

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise SeriesError("a series needs at least the constant coefficient")
        if not is_exact(self.base_point):
            raise SeriesError(f"base point must be rational, got {self.base_point!r}")
        object.__setattr__(self, "base_point", Fraction(self.base_point))
        object.__setattr__(self, "coeffs", tuple(self.domain.convert(c) for c in self.coeffs))

    @classmethod
    def from_coeffs(cls, coeffs: Iterable, base_point=0, domain: Domain | None = None) -> "TruncatedSeries":
        coeffs = list(coeffs)
        if domain is None:
            domain = EXACT if all(is_exact(c) for c in coeffs) else float_domain()
        return cls(tuple(coeffs), Fraction(base_point), domain)

    @classmethod
    def zero(cls, order: int, base_point=0, domain: Domain = EXACT) -> "TruncatedSeries":
        return cls((0,) * (order + 1), Fraction(base_point), domain)

    @classmethod
    def variable(cls, order: int, base_point=0, domain: Domain = EXACT) -> "TruncatedSeries":
        """The coordinate ``y`` itself, i.e. ``y0 + (y - y0)``, known exactly."""
        if order < 1:
            return cls((base_point,), Fraction(base_point), domain)
        return cls((base_point, 1) + (0,) * (order - 1), Fraction(base_point), domain)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]

    def __iter__(self):
        return iter(self.coeffs)

    def _check(self, other: "TruncatedSeries"):
        if not isinstance(other, TruncatedSeries):
            raise SeriesError(f"expected a TruncatedSeries, got {type(other).__name__}")
        if self.base_point != other.base_point:
            raise SeriesError(
                f"base point mismatch: {self.base_point} vs {other.base_point}")
        if self.domain != other.domain:
            raise SeriesError(f"coefficient domain mismatch: {self.domain} vs {other.domain}")

    def _new(self, coeffs) -> "TruncatedSeries":
        return TruncatedSeries(tuple(coeffs), self.base_point, self.domain)

    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self._new((self.coeffs[0] + self.domain.convert(other),) + self.coeffs[1:])
        self._check(other)
        K = min(self.order, other.order)
        with _Ctx(self.domain):
            return self._new(self.coeffs[i] + other.coeffs[i] for i in range(K + 1))

    __radd__ = __add__

    def __neg__(self):
        return self._new(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            s = self.domain.convert(other)
            with _Ctx(self.domain):
                return self._new(c * s for c in self.coeffs)
        self._check(other)
        K = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        zero = self.domain.convert(0)
        out = [zero] * (K + 1)
        with _Ctx(self.domain):
            for i in range(K + 1):
                ai = a[i]
                if not ai:
                    continue
                for j in range(K + 1 - i):
                    if b[j]:
                        out[i + j] += ai * b[j]
        return self._new(out)

    __rmul__ = __mul__

    def derivative(self) -> "TruncatedSeries":
        if self.order < 1:
            raise SeriesError("derivative needs order >= 1")
        with _Ctx(self.domain):
            return self._new(self.coeffs[i] * i for i in range(1, self.order + 1))

    def shift_up(self) -> "TruncatedSeries":
        """Multiply by ``(y - y0)``; the result is known to one more order."""
        return self._new((self.domain.convert(0),) + self.coeffs)

    def shift_down(self) -> "TruncatedSeries":
        """Divide by ``(y - y0)``; requires a vanishing constant term."""
        if self.coeffs[0] != 0:
            raise SeriesError("shift_down needs a zero constant coefficient")
        if self.order < 1:
            raise SeriesError("shift_down needs order >= 1")
        return self._new(self.coeffs[1:])

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise SeriesError(f"cannot raise order {self.order} to {order}")
        if order < 0:
            raise SeriesError("order must be non-negative")
        return self._new(self.coeffs[: order + 1])

    def valuation(self) -> int | None:
        """Index of the first nonzero coefficient, None if all known ones vanish."""
        for i, c in enumerate(self.coeffs):
            if c != 0:
                return i
        return None

    def eval(self, y):
        return series_eval(self, y)

    def __call__(self, y):
        return series_eval(self, y)

    def __str__(self):
        var = "y" if self.base_point == 0 else f"(y - {self.base_point})"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
            terms.append(f"{c}" if not mono else (mono if c == 1 else f"{c}*{mono}"))
        return (" + ".join(terms) or "0") + f" + O({var}^{self.order + 1})"


def series_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    a._check(b)
    return a + b


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    a._check(b)
    return a * b


def series_derivative(a: TruncatedSeries) -> TruncatedSeries:
    return a.derivative()


def series_exp_linear(mu, K: int = DEFAULT_ORDER, domain: Domain | None = None) -> TruncatedSeries:
    """Taylor coefficients ``mu^m / m!`` of ``exp(mu*y)`` about 0 for m = 0..K."""
    if K < 0:
        raise SeriesError("order must be non-negative")
    if domain is None:
        domain = EXACT if is_exact(mu) else float_domain()
    m = domain.convert(mu)
    with _Ctx(domain):
        coeffs = [m**j / factorial(j) for j in range(K + 1)]
    return TruncatedSeries(tuple(coeffs), Fraction(0), domain)


def series_eval(a: TruncatedSeries, y):
    """Horner evaluation of the truncating polynomial at ``y``.

    Exact series at an exact point give a Fraction; otherwise a float
    (or an ``mpf`` for float domains wider than double precision).
    """
    if a.domain.is_exact and is_exact(y):
        x = Fraction(y) - a.base_point
        acc = Fraction(0)
        for c in reversed(a.coeffs):
            acc = acc * x + c
        return acc
    if a.domain.is_exact:
        x = float(y) - float(a.base_point)
        acc = 0.0
        for c in reversed(a.coeffs):
            acc = acc * x + float(c)
        return acc
    with mpmath.workprec(a.domain.bits):
        x = a.domain.convert(y) - a.domain.convert(a.base_point)
        acc = mpmath.mpf(0)
        for c in reversed(a.coeffs):
            acc = acc * x + c
        return float(acc) if a.domain.bits <= 53 else acc


def polynomial(coeffs: Sequence, order: int, base_point=0) -> TruncatedSeries:
    """Embed an exactly known polynomial as a series of the given order (zero-padded)."""
    coeffs = list(coeffs)
    if len(coeffs) > order + 1 and any(c != 0 for c in coeffs[order + 1:]):
        raise SeriesError("polynomial degree exceeds requested order")
    coeffs = (coeffs + [0] * (order + 1))[: order + 1]
    return TruncatedSeries.from_coeffs(coeffs, base_point)


def recenter_polynomial(coeffs: Sequence, new_base, order: int) -> TruncatedSeries:
    """Exact Taylor shift of a polynomial given about 0 to ``new_base``."""
    c = [Fraction(x) for x in coeffs]
    h = Fraction(new_base)
    # synthetic division repeated: coefficient k of p(h + x)
    work = c[:]
    out = []
    for _ in range(len(work)):
        acc = Fraction(0)
        rem = []
        for a in reversed(work):
            acc = acc * h + a
            rem.append(acc)
        out.append(rem[-1])
        rem.pop()
        work = list(reversed(rem))
    return polynomial(out, order, base_point=h)
