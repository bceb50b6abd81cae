"""Sweep of the one-parameter origin family psi(y, mu), mu in [-1, 0).

For each grid point the Q_k^0 recursion is run in exact arithmetic and the
row records whether Q_1..Q_K are non-negative near the origin (lowest
nonzero coefficient positive), together with the completeness verdict of
the metric.  Full coefficientwise non-negativity is recorded alongside.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import List, Optional, Sequence, Tuple

from ._rational import render
from .geometry import completeness
from .immersion import certify, default_series_order, q_recursion
from .series import TruncatedSeries
from .soliton import SolitonParams, make_profile, polynomial_profile

CSV_HEADER = ("mu", "certified", "first_violation_k", "min_coeff", "completeness")


class ScanError(ValueError):
    pass


def family_params(n: int, mu) -> SolitonParams:
    """lambda = mu - n - 1 and the origin value of nu, for mu != 0."""
    mu = Fraction(mu)
    if mu == 0:
        raise ScanError("mu = 0 is the y + y^2 limit, not a soliton of the family")
    lam = mu - n - 1
    return SolitonParams(n=n, lam=lam, mu=mu, nu=factorial(n + 1) / mu ** (n + 1))


def family_psi(n: int, mu, K: int) -> TruncatedSeries:
    """y + sum_{j=2}^K (n+1)!/(n+j-1)! mu^(j-2) y^j, exact."""
    if n < 2:
        raise ScanError("the family is defined for n >= 2")
    if K < 2:
        raise ScanError("order K must be at least 2")
    mu = Fraction(mu)
    top = factorial(n + 1)
    coeffs = [Fraction(0), Fraction(1)]
    coeffs += [Fraction(top, factorial(n + j - 1)) * mu ** (j - 2) for j in range(2, K + 1)]
    return TruncatedSeries.from_coeffs(coeffs)


def default_grid(step=Fraction(1, 100)) -> List[Fraction]:
    """Exact points -1, -1 + step, ..., up to but excluding 0."""
    step = Fraction(step)
    if step <= 0 or step > 1:
        raise ScanError("grid step must lie in (0, 1]")
    out, mu = [], Fraction(-1)
    while mu < 0:
        out.append(mu)
        mu += step
    return out


@dataclass(frozen=True)
class ScanRow:
    mu: Fraction
    certified: bool
    first_violation: Optional[Tuple[int, int]]
    min_coeff: Fraction
    completeness: str
    coefficientwise: Optional[Tuple[int, int]] = None  # first negative coefficient, if any
    label: str = "grid"

    def __post_init__(self):
        if self.certified != (self.first_violation is None):
            raise ScanError("certified must hold exactly when there is no violation")

    def csv_fields(self):
        fv = "" if self.first_violation is None else str(self.first_violation[0])
        return (render(self.mu), "true" if self.certified else "false", fv,
                render(self.min_coeff), self.completeness)

    def to_json(self) -> dict:
        d = {
            "mu": render(self.mu),
            "label": self.label,
            "certified": self.certified,
            "first_violation": None if self.first_violation is None else
            {"k": self.first_violation[0], "index": self.first_violation[1]},
            "min_coeff": render(self.min_coeff),
            "completeness": self.completeness,
            "coefficientwise_nonnegative": self.coefficientwise is None,
        }
        if self.coefficientwise is not None:
            d["coefficientwise_violation"] = {"k": self.coefficientwise[0], "index": self.coefficientwise[1]}
        return d


def _row(args) -> ScanRow:
    n, mu, K, order = args
    mu = Fraction(mu)
    psi = family_psi(n, mu, order)
    if mu == 0:
        profile, label = polynomial_profile([0, 1, 1], n=n), "limit"
    else:
        profile, label = make_profile(family_params(n, mu)), "grid"
    qs = q_recursion(psi, 0, K)
    local = certify(psi, 0, K, criterion="local", qs=qs)
    fv = local.first_violation
    cv = next(((k, i) for k, q in enumerate(qs, start=1) for i, c in enumerate(q.coeffs) if c < 0), None)
    min_coeff = min(v for _, v, _ in local.per_k_min)
    return ScanRow(
        mu=mu,
        certified=local.certified,
        first_violation=None if fv is None else (fv.k, fv.index),
        min_coeff=min_coeff,
        completeness=completeness(profile).verdict,
        coefficientwise=cv,
        label=label,
    )


def stability_scan(n: int, K: int, mu_grid: Sequence, order: Optional[int] = None,
                   workers: Optional[int] = None, include_limit: bool = False) -> List[ScanRow]:
    """Certify psi(., mu) at eps = 0 to order K for every grid point.

    Rows come back sorted by mu.  ``include_limit`` appends the mu = 0
    boundary row built from y + y^2.  ``workers > 1`` spreads grid points
    over processes; the result does not depend on it.
    """
    if K < 2:
        raise ScanError("order K must be at least 2")
    if n < 2:
        raise ScanError("the family is defined for n >= 2")
    grid = sorted(set(Fraction(m) for m in mu_grid))
    for mu in grid:
        if not (-1 <= mu < 0):
            raise ScanError(f"grid point {mu} outside [-1, 0)")
    if include_limit:
        grid.append(Fraction(0))
    if not grid:
        return []
    order = order or default_series_order(K)
    jobs = [(n, mu, K, order) for mu in grid]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_row(j) for j in jobs]
    return sorted(rows, key=lambda r: r.mu)


def certified_interval(rows: Sequence[ScanRow]) -> Optional[Tuple[Fraction, Fraction]]:
    """Largest contiguous run of certified grid rows, as (mu_lo, mu_hi).

    Ties go to the run closer to 0.  The mu = 0 limit row is ignored.
    """
    grid = [r for r in sorted(rows, key=lambda r: r.mu) if r.label == "grid"]
    best, start = None, None
    for i, r in enumerate(grid + [None]):
        if r is not None and r.certified:
            if start is None:
                start = i
            continue
        if start is not None:
            run = (i - start, grid[start].mu, grid[i - 1].mu)
            if best is None or run[0] >= best[0]:
                best = run
            start = None
    return None if best is None else (best[1], best[2])


def scan_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=lambda r: r.mu):
        w.writerow(r.csv_fields())
    return buf.getvalue()


def scan_json(rows: Sequence[ScanRow]) -> str:
    return json.dumps([r.to_json() for r in sorted(rows, key=lambda r: r.mu)], indent=2) + "\n"


def scan_export(rows: Sequence[ScanRow], path, fmt: str = "csv") -> None:
    text = scan_csv(rows) if fmt == "csv" else scan_json(rows)
    try:
        with open(os.fspath(path), "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write scan to {path}: {exc.strerror or exc}") from exc
