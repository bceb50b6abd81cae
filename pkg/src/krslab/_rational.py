"""Parsing and rendering of the numbers that cross the package boundary."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[Fraction, float]


def is_exact(x) -> bool:
    return isinstance(x, (int, Rational)) and not isinstance(x, bool)


def to_number(x) -> Number:
    """Coerce ``x`` to a Fraction when it is exact, otherwise to a float.

    Strings of the form ``"p/q"``, ``"p"`` or ``"-p/q"`` are read exactly;
    strings containing a decimal point or exponent are read as floats.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return x
    if isinstance(x, str):
        s = x.strip()
        if not s:
            raise ValueError("empty number string")
        if any(c in s for c in ".eE") and "/" not in s:
            return to_number(float(s))
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse number {x!r}") from exc
    raise TypeError(f"unsupported number type {type(x).__name__}")


def render(x) -> Union[str, float]:
    """JSON-friendly rendering: exact values as ``"p/q"`` strings in lowest
    terms with the sign on the numerator, floats unchanged."""
    if is_exact(x):
        return str(Fraction(x))
    if x == math.inf:
        return "inf"
    return float(x)


def as_float(x) -> float:
    return float(x)
