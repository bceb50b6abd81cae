"""krslab command line: classify, immersible, complete, necessary, scan, series, profile.

Parameters are a JSON object ``{"n": 2, "lambda": "0", "mu": "1", "nu": "2"}``
given inline, as a file path, or as ``-`` for stdin.  Exit codes: 0 success,
1 negative verdict, 2 bad input, 3 failed precondition.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, replace
from typing import List, Optional

from ._rational import is_exact, render, to_number
from .geometry import GeometryError, completeness, solve_profile
from .geometry import MetricDegeneracyError as DegenerateMetric
from .immersion import ImmersionError, certify, default_series_order, necessary_conditions
from .scan import certified_interval, default_grid, scan_csv, scan_json, stability_scan
from .series import SeriesError, TruncatedSeries
from .soliton import (DomainError, MetricDegeneracyError, OriginConditionError, RouteToKEError,
                      SolitonError, SolitonParams, classify, make_profile, origin_condition,
                      polynomial_profile, psi_origin_series)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_PRECONDITION = 0, 1, 2, 3
FORMATS = ("json", "csv", "table")
CONFIG_ENV = "KRSLAB_CONFIG"


class InputError(Exception):
    pass


class PreconditionError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    order: int = 20
    regime: str = "exact"
    tol: float = 1e-10
    format: Optional[str] = None  # json, except csv for scan

    def validate(self) -> "Config":
        if isinstance(self.order, bool) or not isinstance(self.order, int) or self.order < 2:
            raise InputError(f"order must be an integer >= 2, got {self.order!r}")
        if self.regime not in ("exact", "float"):
            raise InputError(f"regime must be 'exact' or 'float', got {self.regime!r}")
        if isinstance(self.tol, bool) or not isinstance(self.tol, (int, float)) or not 0 < self.tol <= 1e-4:
            raise InputError(f"tol must lie in (0, 1e-4], got {self.tol!r}")
        if self.format is not None and self.format not in FORMATS:
            raise InputError(f"format must be one of {', '.join(FORMATS)}, got {self.format!r}")
        return self


def load_config(path: Optional[str]) -> Config:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"config {path} must be a flat JSON object")
    unknown = set(data) - {"order", "regime", "tol", "format"}
    if unknown:
        raise InputError(f"unknown config keys in {path}: {sorted(unknown)}")
    return Config(**data).validate()


def resolve_config(args) -> Config:
    cfg = load_config(getattr(args, "config", None))
    over = {k: getattr(args, k) for k in ("order", "tol", "format") if getattr(args, k, None) is not None}
    return replace(cfg, **over).validate()


# ---------------------------------------------------------------------------
# input parsing


def read_params(text: str, regime: str = "exact") -> SolitonParams:
    if text == "-":
        text = sys.stdin.read()
    elif not text.lstrip().startswith("{"):
        try:
            with open(text) as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read parameters from {text}: {exc.strerror}") from exc
    try:
        params = SolitonParams.from_json(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"parameters are not valid JSON: {exc}") from exc
    except SolitonError as exc:
        raise InputError(str(exc)) from exc
    if regime == "float":
        params = params.replace(**{k: float(v) for k, v in
                                   (("lam", params.lam), ("mu", params.mu), ("nu", params.nu), ("k1", params.k1))
                                   if v is not None})
    return params


def parse_number_list(text: str) -> list:
    try:
        return [to_number(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except (ValueError, TypeError) as exc:
        raise InputError(f"bad coefficient list {text!r}: {exc}") from exc


def parse_number(text: str):
    try:
        return to_number(text)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in obj:
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def emit(payload, fmt: str, header: Optional[List[str]] = None, rows: Optional[list] = None, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return
    if header is None:
        header, rows = ["key", "value"], list(_flatten(payload))
    rows = [[_cell(v) for v in r] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        out.write(buf.getvalue())
        return
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    for line in [header, ["-" * w for w in widths]] + rows:
        out.write("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() + "\n")


# ---------------------------------------------------------------------------
# commands


def _origin_state(params):
    try:
        return origin_condition(params)
    except RouteToKEError:
        return None


def cmd_classify(args, cfg: Config) -> int:
    params = read_params(args.params, cfg.regime)
    c = classify(params)
    payload = {"params": params.to_json(), "classification": c.to_json(),
               "origin_defined": _origin_state(params)}
    if params.mu != 0:
        payload["origin_nu"] = render(params.origin_nu())
    emit(payload, cfg.format)
    return EXIT_OK


def _require_origin(params):
    ok = _origin_state(params)
    if ok is None:
        raise PreconditionError("mu = 0: the soliton is Kahler-Einstein and has no origin series here")
    if not ok:
        extra = " and k1 = 0" if params.n == 1 else ""
        raise PreconditionError(
            f"origin condition fails: need nu = n!(mu - lambda)/mu^(n+1) = {render(params.origin_nu())}{extra}, "
            f"got nu = {render(params.nu)}")


def cmd_immersible(args, cfg: Config) -> int:
    K = cfg.order
    N = args.series_order or default_series_order(K)
    if (args.params is None) == (args.series is None):
        raise InputError("give either parameters or --series, not both")
    if args.series is not None:
        coeffs = parse_number_list(args.series)
        coeffs = (coeffs + [0] * (N + 1))[: max(N, len(coeffs) - 1) + 1]
        try:
            psi = TruncatedSeries.from_coeffs(coeffs)
        except SeriesError as exc:
            raise InputError(str(exc)) from exc
        source = {"series": [render(c) for c in coeffs[: len(parse_number_list(args.series))]]}
    else:
        params = read_params(args.params, cfg.regime)
        _require_origin(params)
        psi = psi_origin_series(params, N)
        source = {"params": params.to_json()}
    try:
        cert = certify(psi, args.epsilon, K, criterion=args.criterion)
    except ImmersionError as exc:
        raise PreconditionError(str(exc)) from exc
    payload = dict(source, certificate=cert.to_json())
    if cfg.format == "json":
        emit(payload, "json")
    else:
        header = ["k", "min", "index"]
        rows = [[k, render(v), i] for k, v, i in cert.per_k_min]
        emit(payload, cfg.format, header, rows)
    return EXIT_OK if cert.verdict != "violated" else EXIT_NEGATIVE


def _profile_from_args(args, cfg: Config, need_n: bool = False):
    if (args.params is None) == (args.poly is None):
        raise InputError("give either parameters or --poly, not both")
    if args.poly is not None:
        coeffs = parse_number_list(args.poly)
        if not all(is_exact(c) for c in coeffs):
            raise InputError("--poly coefficients must be rational")
        h = parse_number(args.h) if args.h is not None else 0
        if need_n and args.n is None:
            raise InputError("--poly profiles need --n")
        lam = parse_number(args.lam) if args.lam is not None else None
        return polynomial_profile(coeffs, y_inf=h, n=args.n, lam=lam), {"poly": [render(c) for c in coeffs]}
    params = read_params(args.params, cfg.regime)
    if params.mu == 0:
        raise PreconditionError("mu = 0: the soliton is Kahler-Einstein; no closed-form profile")
    return make_profile(params), {"params": params.to_json()}


def cmd_complete(args, cfg: Config) -> int:
    profile, source = _profile_from_args(args, cfg)
    rep = completeness(profile)
    emit(dict(source, completeness=rep.to_json()), cfg.format)
    return EXIT_OK if rep.verdict == "complete" else EXIT_NEGATIVE


def cmd_necessary(args, cfg: Config) -> int:
    profile, source = _profile_from_args(args, cfg, need_n=True)
    try:
        rep = necessary_conditions(profile, K=min(cfg.order, args.depth))
    except ImmersionError as exc:
        raise PreconditionError(str(exc)) from exc
    payload = dict(source, report=rep.to_json())
    if cfg.format == "json":
        emit(payload, "json")
    else:
        rows = [[c.name, c.status, render(c.value) if c.value is not None else None, c.regime] for c in rep.checks]
        emit(payload, cfg.format, ["check", "status", "value", "regime"], rows)
    return EXIT_OK if rep.passed else EXIT_NEGATIVE


def cmd_scan(args, cfg: Config) -> int:
    step = parse_number(args.step)
    if not is_exact(step):
        raise InputError("--step must be rational, e.g. 1/100")
    grid = default_grid(step)
    lo = parse_number(args.mu_min)
    if not is_exact(lo):
        raise InputError("--mu-min must be rational")
    grid = [m for m in grid if m >= lo]
    rows = stability_scan(args.n, cfg.order, grid, workers=args.workers, include_limit=args.include_limit)
    if cfg.format == "json":
        text = scan_json(rows)
    elif cfg.format == "csv":
        text = scan_csv(rows)
    else:
        buf = io.StringIO()
        emit(None, "table", ["mu", "certified", "first_violation_k", "min_coeff", "completeness"],
             [r.csv_fields() for r in rows], out=buf)
        text = buf.getvalue()
    if args.output:
        try:
            with open(args.output, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.output}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)
    iv = certified_interval(rows)
    msg = "no certified grid point" if iv is None else f"certified to K={cfg.order} on mu in [{iv[0]}, {iv[1]}]"
    print(msg, file=sys.stderr)
    return EXIT_OK


def cmd_series(args, cfg: Config) -> int:
    params = read_params(args.params, cfg.regime)
    _require_origin(params)
    psi = psi_origin_series(params, cfg.order)
    coeffs = [render(c) for c in psi.coeffs]
    emit({"params": params.to_json(), "order": cfg.order, "coefficients": coeffs}, cfg.format,
         ["index", "coefficient"], list(enumerate(coeffs)))
    return EXIT_OK


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([_cell(v) for v in r] for r in rows)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def cmd_profile(args, cfg: Config) -> int:
    params = read_params(args.params, cfg.regime)
    if params.mu == 0:
        raise PreconditionError("mu = 0: the soliton is Kahler-Einstein; no closed-form profile")
    r0, r1 = float(parse_number(args.r_min)), float(parse_number(args.r_max))
    if not 0 < r0 < r1:
        raise InputError("need 0 < r-min < r-max")
    profile = make_profile(params)
    samples = solve_profile(profile, r_range=(r0, r1), tol=cfg.tol, num=args.num, spacing=args.spacing)
    if args.plot_data:
        _write_csv(args.plot_data + "_psi.csv", ["y", "psi"], zip(samples.y, samples.psi))
        _write_csv(args.plot_data + "_potential.csv", ["r", "f"], zip(samples.r, samples.f))
    cols = ["r", "y", "f", "fprime", "detg"]
    data = list(zip(samples.r, samples.y, samples.f, samples.fprime, samples.detg))
    if cfg.format == "json":
        emit({"params": params.to_json(), "provenance": samples.provenance,
              "samples": [dict(zip(cols, map(float, row))) for row in data]}, "json")
    else:
        emit(None, cfg.format, cols, [[float(v) for v in row] for row in data])
    if len(samples) < args.num:
        print(f"profile stopped at r = {samples.r[-1]!r}: psi reached 0", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _globals(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--order", "-K", type=int, default=d, help="truncation order K (default 20)")
    parser.add_argument("--tol", type=float, default=d, help="ODE tolerance in (0, 1e-4] (default 1e-10)")
    parser.add_argument("--format", choices=FORMATS, default=d, help="output format (default json)")
    parser.add_argument("--config", default=d, help=f"flat JSON config file (fallback ${CONFIG_ENV})")


def _profile_inputs(p):
    p.add_argument("params", nargs="?", help="parameter JSON, file path or -")
    p.add_argument("--poly", help="exact polynomial profile psi as coefficients c0,c1,...")
    p.add_argument("--h", help="y_inf of a --poly profile (default 0)")
    p.add_argument("--n", type=int, help="complex dimension of a --poly profile")
    p.add_argument("--lambda", dest="lam", help="solitonic constant of a --poly profile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krslab", description=__doc__.splitlines()[0])
    _globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="trivial / flat / nontrivial and origin condition")
    p.add_argument("params")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("immersible", parents=[common], help="order-K immersibility certificate")
    p.add_argument("params", nargs="?")
    p.add_argument("--epsilon", "-e", type=int, default=0, choices=(-1, 0, 1))
    p.add_argument("--series", help="ad-hoc origin profile as coefficients c0,c1,... of psi")
    p.add_argument("--series-order", type=int, help="series order N >= K (default max(32, 2K))")
    p.add_argument("--criterion", choices=("coefficients", "local"), default="coefficients")
    p.set_defaults(func=cmd_immersible)

    p = sub.add_parser("complete", parents=[common], help="completeness of the metric")
    _profile_inputs(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("necessary", parents=[common], help="necessary conditions for projective inducedness")
    _profile_inputs(p)
    p.add_argument("--depth", type=int, default=8, help="largest k in the product checks (capped by K)")
    p.set_defaults(func=cmd_necessary)

    p = sub.add_parser("scan", parents=[common], help="stability scan of the origin family over mu in [-1, 0)")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--step", default="1/100")
    p.add_argument("--mu-min", default="-1")
    p.add_argument("--include-limit", action="store_true", help="append the mu = 0 row (psi = y + y^2)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_scan, default_format="csv")

    p = sub.add_parser("series", parents=[common], help="origin Taylor coefficients of psi up to K")
    p.add_argument("params")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("profile", parents=[common], help="integrate y(r), f(r) and det g on an r-grid")
    p.add_argument("params")
    p.add_argument("--r-min", default="0.01")
    p.add_argument("--r-max", default="0.5")
    p.add_argument("--num", type=int, default=1001)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")
    p.add_argument("--plot-data", metavar="PREFIX", help="also write PREFIX_psi.csv and PREFIX_potential.csv")
    p.set_defaults(func=cmd_profile)
    return parser


_PRECONDITION = (PreconditionError, OriginConditionError, RouteToKEError, DomainError, MetricDegeneracyError,
                 GeometryError, DegenerateMetric)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        if cfg.format is None:
            cfg = replace(cfg, format=getattr(args, "default_format", "json"))
        return args.func(args, cfg)
    except _PRECONDITION as exc:
        print(f"krslab: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (InputError, ValueError, TypeError) as exc:
        print(f"krslab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
