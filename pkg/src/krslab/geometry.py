"""Metric reconstruction, determinant, soliton residual and completeness.

The profile determines the metric through y(r) = r f'(r) and dy/dt = psi(y)
with t = log r.  For origin-defined profiles the homothety in r is fixed by
y(r) / r -> 1 as r -> 0, i.e.

    log r(y) = log y + int_0^y (1/psi(s) - 1/s) ds,
    f(r(y))  = int_0^y s / psi(s) ds.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Optional

import numpy as np
from scipy import integrate

from ._rational import is_exact, render
from .soliton import PsiProfile, SolitonError, SolitonParams

DEFAULT_TOL = 1e-10
WINDOW_CAP = 1e6


class GeometryError(ValueError):
    pass


class MetricDegeneracyError(GeometryError):
    pass


class SingularityError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# profile evaluation helpers (real or complex argument)


def _tail_ratio(x, n):
    """(e^x - sum_{m<=n} x^m/m!) / x^(n+1), finite at x = 0."""
    if abs(x) < 2.0:
        term = 1.0 / factorial(n + 1)
        total = 0.0
        m = n + 1
        while True:
            total += term
            m += 1
            term = term * x / m
            if abs(term) <= 1e-18 * abs(total) or m > n + 80:
                return total
    e = cmath.exp(x) if isinstance(x, complex) else math.exp(min(x, 700.0))
    return (e - sum(x**m / factorial(m) for m in range(n + 1))) / x ** (n + 1)


def excess_over_y2(profile: PsiProfile, s):
    """(psi(s) - s) / s^2 for an origin-defined profile, without cancellation."""
    if profile.poly is not None or profile.series is not None:
        c = profile.poly if profile.poly is not None else profile.series.coeffs
        c = [complex(x) if isinstance(s, complex) else float(x) for x in c]
        if len(c) < 2:
            c = c + [0.0] * (2 - len(c))
        if c[0] != 0 or c[1] != 1:
            raise GeometryError("origin normalisation needs psi = y + O(y^2)")
        acc = 0.0
        for a in reversed(c[2:]):
            acc = acc * s + a
        return acc
    p = profile.params
    if profile.origin_series is None:
        raise GeometryError("profile is not origin-defined")
    n, mu = p.n, float(p.mu)
    nu0 = float(p.nu)
    # psi - s = nu0 s^(1-n) T_n(mu s) = nu0 mu^(n+1) s^2 * tail_ratio(mu s)
    return nu0 * mu ** (n + 1) * _tail_ratio(mu * s, n)


def psi_value(profile: PsiProfile, y):
    """psi at a real or complex point."""
    closed_origin = profile.params is not None and profile.origin_series is not None
    if isinstance(y, complex):
        if closed_origin:
            return y + y * y * excess_over_y2(profile, y)
        p = profile.params
        if p is None:
            c = profile.poly if profile.poly is not None else profile.series.coeffs
            acc = 0j
            for a in reversed(c):
                acc = acc * y + float(a)
            return acc
        raise GeometryError("complex evaluation needs an origin-defined or polynomial profile")
    if closed_origin and 0 <= y < 1.0:
        return y + y * y * excess_over_y2(profile, y)
    return profile.psi(y)


def log_r_of_y(profile: PsiProfile, y: float) -> float:
    """log r at which y(r) = y, with the origin normalisation y/r -> 1."""
    if not profile.origin_defined:
        raise GeometryError("origin normalisation needs an origin-defined profile")
    if not 0 < float(y) < float(profile.y_sup):
        raise GeometryError(f"y = {y} outside the profile domain (0, {profile.y_sup})")

    def integrand(s):
        g = s * excess_over_y2(profile, s)
        return -excess_over_y2(profile, s) / (1.0 + g)

    y = float(y)
    if y <= 1.0:
        val, _ = integrate.quad(integrand, 0.0, y, epsabs=1e-15, epsrel=1e-13, limit=200)
        return math.log(y) + val
    base = log_r_of_y(profile, 1.0)
    val, _ = integrate.quad(lambda s: 1.0 / psi_value(profile, s), 1.0, y, epsabs=1e-15, epsrel=1e-13,
                            limit=400)
    return base + val


def potential_at_y(profile: PsiProfile, y: float) -> float:
    """f(r(y)) = int_0^y s/psi(s) ds (origin-defined, f(0) = 0)."""
    def integrand(s):
        return 1.0 / (1.0 + s * excess_over_y2(profile, s))
    val, _ = integrate.quad(integrand, 0.0, float(y), epsabs=1e-16, epsrel=1e-13, limit=200)
    return val


# ---------------------------------------------------------------------------
# reconstruction


@dataclass(frozen=True)
class ProfileSamples:
    r: np.ndarray
    y: np.ndarray
    f: np.ndarray
    fprime: np.ndarray
    psi: np.ndarray
    n: Optional[int] = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.r)

    @property
    def detg(self) -> np.ndarray:
        if self.n is None:
            raise GeometryError("samples carry no complex dimension")
        return self.y ** (self.n - 1) * self.psi / self.r**self.n

    def to_csv(self, path):
        cols = ["r", "y", "f", "fprime"] + (["detg"] if self.n is not None else [])
        det = self.detg if self.n is not None else None
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                for i in range(len(self.r)):
                    row = [self.r[i], self.y[i], self.f[i], self.fprime[i]]
                    if det is not None:
                        row.append(det[i])
                    w.writerow([repr(float(v)) for v in row])
        except OSError as exc:
            raise OSError(f"cannot write profile samples to {path}: {exc}") from exc


def _grid(r_range, num, spacing):
    a, b = (float(r_range[0]), float(r_range[1]))
    if not (0 < a < b):
        raise GeometryError(f"need 0 < r_min < r_max, got {r_range}")
    if spacing == "linear":
        return np.linspace(a, b, num)
    if spacing == "log":
        return np.geomspace(a, b, num)
    raise GeometryError(f"unknown spacing {spacing!r}")


def _rhs(profile):
    def rhs(t, s):
        return [psi_value(profile, s[0]), s[0]]
    return rhs


def _integrate(profile, t0, state0, t_end, tol, t_eval=None):
    if t_end == t0:
        return None
    ev = lambda t, s: psi_value(profile, s[0]) if s[0] > 0 else -1.0
    ev.terminal = True
    sol = integrate.solve_ivp(_rhs(profile), (t0, t_end), state0, method="DOP853", rtol=tol,
                              atol=1e-300, dense_output=True, events=ev, t_eval=None)
    if sol.status == 1:
        t_hit = sol.t_events[0][0]
        raise MetricDegeneracyError(
            f"psi <= 0 reached at r = {math.exp(t_hit):.12g} (y = {sol.y_events[0][0][0]:.12g})")
    if sol.status != 0:
        raise SingularityError(
            f"integration stopped at r = {math.exp(sol.t[-1]):.12g} (y = {sol.y[0][-1]:.6g}): {sol.message}")
    return sol


def _start(profile: PsiProfile, y0, r0, tol):
    if profile.origin_defined:
        if y0 is None:
            ysup = float(profile.y_sup)
            y0 = 1e-6 * min(1.0, ysup)
        t0 = log_r_of_y(profile, y0)
        f0 = potential_at_y(profile, y0)
        return float(y0), t0, f0, "origin: log r = log y + int_0^y (1/psi - 1/s) ds, f(0) = 0"
    if y0 is None or r0 is None:
        raise GeometryError("profiles not defined at the origin need explicit y0 and r0")
    y0 = float(y0)
    if not (float(profile.y_inf) < y0 < float(profile.y_sup)):
        raise GeometryError(f"y0 = {y0} outside (y_inf, y_sup)")
    return y0, math.log(float(r0)), 0.0, f"declared: y({r0}) = {y0}, f({r0}) = 0"


def solve_profile(profile: PsiProfile, y0=None, r_range=(0.01, 0.5), tol: float = DEFAULT_TOL,
                  num: int = 1001, spacing: str = "linear", r0=None) -> ProfileSamples:
    """Integrate dy/dt = psi(y), df/dt = y in t = log r and sample on a grid.

    Origin-defined profiles start at y0 (default 1e-6 min(1, y_sup)) with the
    origin normalisation; others need (r0, y0) and take f(r0) = 0.
    """
    if not (0 < tol <= 1e-4):
        raise GeometryError("tolerance must lie in (0, 1e-4]")
    grid = _grid(r_range, num, spacing)
    y0, t0, f0, how = _start(profile, y0, r0 if r0 is not None else r_range[0], tol)
    if psi_value(profile, y0) <= 0:
        raise MetricDegeneracyError(f"psi({y0}) <= 0 at the start point")
    ts = np.log(grid)
    ys = np.empty_like(grid)
    fs = np.empty_like(grid)
    nfev = 0
    for lo_mask, t_end in ((ts < t0, ts.min()), (ts >= t0, ts.max())):
        if not lo_mask.any():
            continue
        sol = _integrate(profile, t0, [y0, f0], t_end, tol)
        if sol is None:
            ys[lo_mask], fs[lo_mask] = y0, f0
            continue
        nfev += sol.nfev
        vals = sol.sol(ts[lo_mask])
        ys[lo_mask], fs[lo_mask] = vals[0], vals[1]
    psis = np.array([psi_value(profile, float(v)) for v in ys])
    if np.any(psis <= 0):
        i = int(np.argmax(psis <= 0))
        raise MetricDegeneracyError(f"psi <= 0 at r = {grid[i]:.12g}")
    prov = {"method": "DOP853", "rtol": tol, "atol": 1e-300, "variable": "t = log r",
            "start": {"y0": y0, "r0": math.exp(t0), "f0": f0}, "normalisation": how, "nfev": nfev,
            "spacing": spacing}
    return ProfileSamples(grid, ys, fs, ys / grid, psis, profile.dim, prov)


def state_at(profile: PsiProfile, r: float, tol: float = 1e-13):
    """(y(r), f(r)) at a single real r."""
    y0, t0, f0, _ = _start(profile, None, None, tol)
    sol = _integrate(profile, t0, [y0, f0], math.log(r), tol)
    if sol is None:
        return y0, f0
    return float(sol.y[0][-1]), float(sol.y[1][-1])


def potential_derivatives(profile: PsiProfile, r: float, K: int, radius: float = None, M: int = 96,
                          tol: float = 1e-13):
    """f^(k)(r) for k = 0..K by Cauchy integrals of the reconstructed potential.

    y and f are continued analytically along the circle |z - r| = radius by
    integrating dy/dt = psi(y), df/dt = y in complex t = log z; the Fourier
    coefficients of f on the circle are f^(k)(r) radius^k / k!.  Returns
    (derivatives, y(r)).
    """
    rho = radius if radius is not None else r / 2
    a = r + rho
    y_a, f_a = state_at(profile, a, tol)
    y_r, _ = state_at(profile, r, tol)
    theta = np.linspace(0.0, 2 * np.pi, M, endpoint=False)

    def rhs(th, s):
        z = r + rho * np.exp(1j * th)
        dt = 1j * rho * np.exp(1j * th) / z
        y = complex(s[0])
        return [psi_value(profile, y) * dt, y * dt]

    sol = integrate.solve_ivp(rhs, (0.0, 2 * np.pi), [complex(y_a), complex(f_a)], method="DOP853",
                              rtol=tol, atol=1e-300, t_eval=theta)
    if sol.status != 0:
        raise SingularityError(f"complex continuation around r = {r} failed: {sol.message}")
    fz = sol.y[1]
    coeffs = np.fft.fft(fz) / M
    ders = [float((coeffs[k] * factorial(k) / rho**k).real) for k in range(K + 1)]
    return ders, y_r


# ---------------------------------------------------------------------------
# determinant and residual


def metric_det(y, psi, r, n: int):
    """det g = y^(n-1) psi / r^n."""
    if r <= 0 or y <= 0 or psi <= 0:
        raise GeometryError(f"det g needs r, y, psi > 0 (got r={r}, y={y}, psi={psi})")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise GeometryError(f"n must be a positive integer, got {n!r}")
    if all(is_exact(v) for v in (y, psi, r)):
        return Fraction(y) ** (n - 1) * Fraction(psi) / Fraction(r) ** n
    return float(y) ** (n - 1) * float(psi) / float(r) ** n


def _uniform(x):
    d = np.diff(x)
    return np.allclose(d, d[0], rtol=1e-9, atol=0)


def r_log_derivative(r: np.ndarray, values: np.ndarray, order: int = 4):
    """r d/dr of sampled values and the interior slice where it is valid.

    Grids uniform in r or in log r get a centred stencil of the requested
    order (2 or 4); other grids fall back to second-order np.gradient.
    """
    if order not in (2, 4):
        raise GeometryError("difference order must be 2 or 4")
    if _uniform(r):
        x, scale = r, r
    elif _uniform(np.log(r)):
        x, scale = np.log(r), np.ones_like(r)
    else:
        return r * np.gradient(values, r, edge_order=2), slice(1, -1)
    h = x[1] - x[0]
    d = np.full_like(values, np.nan)
    if order == 2:
        d[1:-1] = (values[2:] - values[:-2]) / (2 * h)
        return scale * d, slice(1, -1)
    d[2:-2] = (-values[4:] + 8 * values[3:-1] - 8 * values[1:-3] + values[:-4]) / (12 * h)
    return scale * d, slice(2, -2)


def soliton_residual(samples: ProfileSamples, params: SolitonParams, order: int = 4) -> float:
    """max over interior points of |r d/dr(-log det g) - lam y + mu psi|.

    det g is taken from y, psi and r; the derivative is a centred difference
    of the given order on the sample grid.
    """
    if len(samples) < 5:
        raise GeometryError("residual needs at least 5 grid points")
    n = params.n
    logdet = (n - 1) * np.log(samples.y) + np.log(samples.psi) - n * np.log(samples.r)
    d, inner = r_log_derivative(samples.r, -logdet, order)
    lam, mu = float(params.lam), float(params.mu)
    res = d - lam * samples.y + mu * samples.psi
    return float(np.max(np.abs(res[inner])))


# ---------------------------------------------------------------------------
# completeness and maximal domain


@dataclass(frozen=True)
class CompletenessReport:
    verdict: str  # complete | incomplete | inconclusive
    asymptotic_class: str
    exponent: Optional[float]
    integral_estimate: float
    domain: tuple
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "asymptotic_class": self.asymptotic_class,
            "exponent": self.exponent,
            "integral_estimate": render(self.integral_estimate),
            "domain": {"r_inf": render(self.domain[0]), "r_sup": render(self.domain[1])},
            "evidence": self.evidence,
        }


def _poly_degree(c):
    d = len(c) - 1
    while d > 0 and c[d] == 0:
        d -= 1
    return d


def asymptotic_class(profile: PsiProfile):
    """Dominant behaviour of psi at y_sup: (label, exponent, reason)."""
    ysup = profile.y_sup
    if ysup != math.inf:
        v = profile.value_exact(ysup) if is_exact(ysup) else None
        if v is None:
            v = profile.psi(float(ysup))
            d = abs(profile.psi(float(ysup) * (1 + 1e-6)) - profile.psi(float(ysup) * (1 - 1e-6)))
            zero = abs(v) <= 1e-9 * (1 + d / 2e-6 * float(ysup) * 1e-6) or abs(v) <= 1e-9
        else:
            zero = v == 0
        if zero:
            try:
                slope = float(profile.dpsi(ysup))
            except (SolitonError, ZeroDivisionError):
                slope = float("nan")
            if slope < 0:
                return "finite_simple_zero", None, "psi has a simple zero at y_sup"
            return "unknown", None, "psi has a degenerate zero at y_sup"
        return "finite_positive", None, "declared y_sup with psi(y_sup) > 0"
    if profile.poly is not None:
        d = _poly_degree(profile.poly)
        if profile.poly[d] <= 0:
            return "unknown", None, "polynomial with non-positive leading coefficient"
        return ("linear" if d == 1 else "polynomial"), float(d), f"polynomial of degree {d}"
    if profile.series is not None:
        return "unknown", None, "truncated series profile"
    p = profile.params
    n, mu, nu, lam = p.n, p.mu, p.nu, p.lam
    if mu > 0 and nu != 0:
        if nu < 0:
            return "unknown", None, "negative exponential term cannot stay positive"
        return "exponential", None, "nu e^(mu y) dominates (mu > 0, nu > 0)"
    if lam != 0:
        if lam / mu <= 0:
            return "unknown", None, "linear term is negative"
        return "linear", 1.0, "(lam/mu) y dominates" + (" (exponential term decays)" if mu < 0 and nu != 0 else "")
    c0 = n * (lam - mu) / mu**2 if n >= 2 else lam / mu**2 - (p.k + 1) / mu
    if c0 > 0:
        return "polynomial", 0.0, "psi tends to a positive constant"
    return "unknown", None, "no positive dominant term"


def _window_integrals(profile, fn, start, cap=WINDOW_CAP):
    out = []
    a = start
    while a < cap:
        b = min(a * 4, cap)
        val, _ = integrate.quad(lambda s: fn(psi_value(profile, s)), a, b, limit=400)
        out.append((a, b, val))
        a = b
    return out


def _heuristic(windows):
    """Decide divergence from geometric windows; None when undecided."""
    vals = [w[2] for w in windows]
    ratios = [vals[i + 1] / vals[i] for i in range(len(vals) - 1) if vals[i] > 0 and windows[i + 1][1] == 4 * windows[i + 1][0]]
    tail = ratios[-3:]
    if len(tail) < 3:
        return None, ratios
    if all(q < 4 ** -0.25 for q in tail):
        return False, ratios
    if all(q > 0.95 for q in tail):
        return True, ratios
    return None, ratios


def _ref_point(profile):
    ysup = float(profile.y_sup)
    yinf = float(profile.y_inf)
    if ysup == math.inf:
        return max(1.0, 2 * yinf)
    return (yinf + ysup) / 2 if yinf > 0 else min(1.0, ysup / 2)


def _log_r_ref(profile, y_ref):
    return log_r_of_y(profile, y_ref) if profile.origin_defined else 0.0


def _dt_integral_diverges_at_sup(profile, cls, expo):
    if cls == "exponential":
        return False
    if cls in ("linear", "polynomial"):
        return expo <= 1
    if cls == "finite_simple_zero":
        return True
    if cls == "finite_positive":
        return False
    return None


def domain_inf(profile: PsiProfile) -> float:
    if profile.origin_defined:
        return 0.0
    yinf = float(profile.y_inf)
    y_ref = _ref_point(profile)
    v = profile.value_exact(profile.y_inf) if is_exact(profile.y_inf) else None
    if v == 0 or (yinf > 0 and abs(profile.psi(yinf)) < 1e-12):
        return 0.0
    try:
        val, _ = integrate.quad(lambda s: 1.0 / psi_value(profile, s), yinf, y_ref, limit=400)
    except (ZeroDivisionError, OverflowError):
        return 0.0
    return math.exp(-val)


def domain_sup(profile: PsiProfile) -> float:
    """r_sup = r_ref exp(int_{y_ref}^{y_sup} dy/psi); +inf when the integral diverges.

    r_ref follows the origin normalisation for origin-defined profiles and is
    1 at the reference point otherwise.
    """
    if profile.y_sup is None:
        raise GeometryError("y_sup is undefined")
    cls, expo, _ = asymptotic_class(profile)
    div = _dt_integral_diverges_at_sup(profile, cls, expo)
    y_ref = _ref_point(profile)
    if div is None:
        w = _window_integrals(profile, lambda p: 1.0 / p, y_ref)
        div, _ = _heuristic(w)
        if div is None:
            raise GeometryError("cannot decide convergence of int dy/psi at y_sup")
    if div:
        return math.inf
    upper = float(profile.y_sup)
    val, _ = integrate.quad(lambda s: 1.0 / psi_value(profile, s), y_ref, upper, limit=400,
                            epsabs=1e-14, epsrel=1e-12)
    return math.exp(_log_r_ref(profile, y_ref) + val)


def completeness(profile: PsiProfile) -> CompletenessReport:
    """Complete iff int^{y_sup} dy / sqrt(psi) diverges.

    The verdict comes from the asymptotic class of psi at y_sup; expanding
    window quadrature (x4 up to 1e6) is attached as evidence and decides
    only when the class is unknown.
    """
    if profile.y_sup is None:
        raise GeometryError("y_sup is undefined")
    cls, expo, why = asymptotic_class(profile)
    y_ref = _ref_point(profile)
    evidence = {"reason": why, "y_ref": y_ref}
    if profile.y_sup == math.inf:
        windows = _window_integrals(profile, lambda p: 1.0 / math.sqrt(p) if p > 0 else math.inf, y_ref)
        numeric, ratios = _heuristic(windows)
        estimate = sum(w[2] for w in windows)
        evidence["window_ratios"] = [round(q, 6) for q in ratios]
        evidence["windows_upto"] = windows[-1][1] if windows else y_ref
    else:
        numeric = None
        estimate, _ = integrate.quad(lambda s: 1.0 / math.sqrt(max(psi_value(profile, s), 1e-300)),
                                     y_ref, float(profile.y_sup), limit=400)
    if cls == "exponential":
        verdict = "incomplete"
    elif cls in ("linear", "polynomial"):
        verdict = "complete" if expo <= 2 else "incomplete"
    elif cls in ("finite_simple_zero", "finite_positive"):
        verdict = "incomplete"
    else:
        verdict = {True: "complete", False: "incomplete", None: "inconclusive"}[numeric]
        evidence["decided_by"] = "numeric window heuristic"
    if numeric is not None:
        evidence["numeric_agrees"] = (numeric == (verdict == "complete")) if verdict != "inconclusive" else None
    try:
        r_sup = domain_sup(profile)
    except GeometryError:
        r_sup = float("nan")
    dom = (domain_inf(profile), r_sup)
    return CompletenessReport(verdict, cls, expo, estimate, dom, evidence)
