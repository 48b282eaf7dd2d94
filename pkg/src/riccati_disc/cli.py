"""Command-line front end.

Problem files are JSON documents with an optional ``period`` (default 2*pi),
an optional ``params`` map and exactly one of

* ``gamma``: canonical right-hand side ``x' = x^2 + gamma(t)``;
* ``gamma_samples``: values of ``gamma`` on a uniform grid over one period;
* ``a2``, ``a1``, ``a0``: general form ``x' = a2 x^2 + a1 x + a0``;
* ``family``: ``{base, dir, eta_min, eta_max}`` for ``gamma = base + eta*dir``.

Exit codes: 0 determinate, 1 input error, 2 numeric failure, 3 undetermined,
4 reduction precondition violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import jsonschema
import numpy as np

from . import exprparse as ep
from .family import AffineFamily, DegenerateDirection, NoIntersection, equidistant, scan
from .functionals import Classification, classify_delta
from .harmonic_balance import HBOptions, NonConvergence, best_bracket, hb_sequence
from .oracle import ScanInconclusive, ScanOptions, count_cycles, default_range, displacements, make_field
from .periodic import TWO_PI, PeriodicFn, center
from .reduction import (A2Vanishes, CurveCrossing, FVanishes, GeneralRiccati, SelfCheckFailed,
                        reduce_nonvanishing, singular_reduce)

log = logging.getLogger("riccati_disc")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_UNDETERMINED, EXIT_REDUCTION = 0, 1, 2, 3, 4
ESC = "ESC"
ENVELOPE_POINTS = 512
PROBE_GRID = 1024

_EXPR = {"type": "string", "minLength": 1}
SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "period": {"type": "number", "exclusiveMinimum": 0},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "gamma": _EXPR,
        "gamma_samples": {"type": "array", "items": {"type": "number"}, "minItems": 8},
        "a2": _EXPR, "a1": _EXPR, "a0": _EXPR,
        "family": {
            "type": "object",
            "properties": {"base": _EXPR, "dir": _EXPR,
                           "eta_min": {"type": "number"}, "eta_max": {"type": "number"}},
            "required": ["base", "dir", "eta_min", "eta_max"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}
_FORMS = {"gamma": ("gamma",), "gamma_samples": ("gamma_samples",),
          "general": ("a2", "a1", "a0"), "family": ("family",)}


class InputError(Exception):
    pass


@dataclass
class Problem:
    form: str  # canonical | general | family
    period: float
    gamma: PeriodicFn | None = None
    eq: GeneralRiccati | None = None
    family: AffineFamily | None = None
    eta_range: tuple[float, float] | None = None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return ESC
    return format(x, ".17g")


def _write_csv(path: str | None, header: Sequence[str], rows) -> None:
    if not path:
        return
    out = sys.stdout if path == "-" else open(path, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    finally:
        if out is not sys.stdout:
            out.close()


def parse_param_overrides(items: Sequence[str] | None) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise InputError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError as exc:
            raise InputError(f"--param {name}: {value!r} is not a number") from exc
    return out


def load_problem(path: str, overrides: dict[str, float] | None = None) -> Problem:
    """Read, validate and build a problem; raises :class:`InputError`."""
    try:
        with open(path, "rb") as fh:
            doc = json.loads(fh.read().decode("utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"{path}: schema violation at {where}: {exc.message}") from exc
    present = [f for f, keys in _FORMS.items() if any(k in doc for k in keys)]
    if len(present) != 1:
        raise InputError(f"{path}: need exactly one of gamma, gamma_samples, a2/a1/a0, family "
                         f"(found {present or 'none'})")
    form = present[0]
    if form == "general" and not all(k in doc for k in _FORMS["general"]):
        raise InputError(f"{path}: general form needs all of a2, a1, a0")
    period = float(doc.get("period", TWO_PI))
    params = dict(doc.get("params", {}))
    params.update(overrides or {})

    def fn(src):
        try:
            f = PeriodicFn.from_expr(ep.parse(src), period, params, label=src)
            f.samples(PROBE_GRID)  # poles on the grid are input errors
            return f
        except ep.ParseError as exc:
            raise InputError(f"{path}: cannot parse {src!r}: {exc}") from exc
        except ep.ExprError as exc:
            raise InputError(f"{path}: {exc}") from exc

    try:
        if form == "gamma":
            return Problem("canonical", period, gamma=fn(doc["gamma"]))
        if form == "gamma_samples":
            return Problem("canonical", period,
                           gamma=PeriodicFn.from_samples(np.asarray(doc["gamma_samples"]), period))
        if form == "general":
            eq = GeneralRiccati(period, fn(doc["a2"]), fn(doc["a1"]), fn(doc["a0"]))
            return Problem("general", period, eq=eq)
        fam = doc["family"]
        if not fam["eta_max"] > fam["eta_min"]:
            raise InputError(f"{path}: family needs eta_max > eta_min")
        try:
            family = AffineFamily(fn(fam["base"]), fn(fam["dir"]))
        except DegenerateDirection as exc:
            raise InputError(f"{path}: {exc}") from exc
        return Problem("family", period, family=family,
                       eta_range=(float(fam["eta_min"]), float(fam["eta_max"])))
    except ep.DomainError as exc:
        raise InputError(f"{path}: coefficient cannot be evaluated: {exc}") from exc


def _canonical_gamma(prob: Problem, grid: int) -> PeriodicFn:
    if prob.form == "canonical":
        return prob.gamma
    if prob.form == "general":
        return reduce_nonvanishing(prob.eq, grid).gamma
    raise InputError("this command needs a canonical or general problem, not a family")


# ---------------------------------------------------------------------------
# Commands

def cmd_estimate(args) -> int:
    prob = load_problem(args.input, parse_param_overrides(args.param))
    gamma = _canonical_gamma(prob, args.grid)
    gbar = gamma.mean()
    if gbar > 0:
        print(f"pre-check: mean(gamma) = {gbar:.12g} > 0, so there are no periodic solutions")
    steps = hb_sequence(center(gamma), args.order, HBOptions(newton_tol=args.newton_tol))
    rows = []
    for s in steps:
        if not s.ok:
            print(f"order {s.order}: no solution ({s.error})")
            continue
        d = s.bracket.shifted(-gbar)
        print(f"order {s.order}: mu* in [{s.bracket.lo + 0.0:.10g}, {s.bracket.hi + 0.0:.10g}], "
              f"delta in [{d.lo + 0.0:.10g}, {d.hi + 0.0:.10g}]")
        rows.append((s.order, s.bracket.lo, s.bracket.hi, d.lo, d.hi))
    _write_csv(args.out, ("order", "mu_lo", "mu_hi", "delta_lo", "delta_hi"), rows)
    best = best_bracket(steps)
    if best is None:
        print("every harmonic-balance order failed", file=sys.stderr)
        return EXIT_NUMERIC
    delta = best.shifted(-gbar)
    cls = Classification.NO_CYCLES if gbar > 0 else classify_delta(delta, args.tau)
    print(f"{cls}, Δ ∈ [{delta.lo:.10g}, {delta.hi:.10g}]")
    return EXIT_UNDETERMINED if cls is Classification.UNDETERMINED else EXIT_OK


def cmd_oracle(args) -> int:
    prob = load_problem(args.input, parse_param_overrides(args.param))
    if prob.form == "family":
        raise InputError("oracle needs a canonical or general problem")
    eq = prob.gamma if prob.form == "canonical" else prob.eq
    opts = ScanOptions(x_lo=args.x_lo, x_hi=args.x_hi, n_points=args.samples,
                       cycle_tol=args.cycle_tol)
    fld = make_field(eq, args.mu_offset)
    lo, hi = default_range(fld)
    lo = lo if args.x_lo is None else args.x_lo
    hi = hi if args.x_hi is None else args.x_hi
    if args.out:
        xs = np.linspace(lo, hi, args.samples)
        _write_csv(args.out, ("x0", "displacement"), zip(xs, displacements(fld, xs, tol=opts.tol)))
    cls, cycles = count_cycles(eq, args.mu_offset, opts)
    _write_csv(args.cycles_out, ("x0", "h", "stability", "mean", "residual"),
               ((c.x0, c.h, c.stability, c.mean, c.residual) for c in cycles))
    for c in cycles:
        print(f"cycle x0={c.x0:.12g} h={c.h:.10g} {c.stability}")
    print(f"classification: {cls}")
    return EXIT_UNDETERMINED if cls is Classification.UNDETERMINED else EXIT_OK


def cmd_family(args) -> int:
    prob = load_problem(args.input, parse_param_overrides(args.param))
    if prob.form != "family":
        raise InputError("family needs a problem with a 'family' section")
    lo, hi = prob.eta_range
    grid = equidistant(lo, hi, args.intervals) if args.intervals else np.linspace(lo, hi, args.points)
    res = scan(prob.family, grid, args.order, HBOptions(newton_tol=args.newton_tol))
    _write_csv(args.anchors_out, ("eta0", "K", "L", "M"),
               ((a.eta0, a.K, a.L, a.M) for a in res.anchors))
    if args.envelope_out:
        eta = np.linspace(lo, hi, ENVELOPE_POINTS)
        _write_csv(args.envelope_out, ("eta", "mu_L", "mu_U", "gamma_bar"),
                   zip(eta, res.mu_lower_env(eta), res.mu_upper_env(eta),
                       prob.family.gamma_bar(eta)))
    for a, (el, gl), (et, gt) in zip(res.anchors, res.line_pairs, res.tent_pairs):
        print(f"anchor eta0={a.eta0:.6f} K={a.K:.6f} L={a.L:.6f} M={a.M:.6f} "
              f"line=({el:.4f}, {gl:.4f}) tent=({et:.4f}, {gt:.4f})")
    for e in res.skipped:
        print(f"anchor eta0={e:.6f} skipped")
    b = res.eta_bracket
    print(f"eta* in [{b.lo:.10g}, {b.hi:.10g}]")
    return EXIT_OK


def cmd_reduce(args) -> int:
    prob = load_problem(args.input, parse_param_overrides(args.param))
    if prob.form != "general":
        raise InputError("reduce needs a general-form problem (a2, a1, a0)")
    if args.u0 is None:
        rec = reduce_nonvanishing(prob.eq, args.grid)
        record = {"kind": rec.kind, "A": _text_or_samples(rec.A_fn, args.grid)}
    else:
        rec = singular_reduce(prob.eq, args.u0, args.grid)
        record = {"kind": rec.kind, "u0": rec.u0, "m": _text_or_samples(rec.m_fn, args.grid),
                  "n": _text_or_samples(rec.n_fn, args.grid)}
    doc = {"period": prob.period}
    e = rec.gamma.to_expr()
    if e is not None:
        doc["gamma"] = ep.to_text(e)
    else:
        doc["gamma_samples"] = [float(v) for v in rec.gamma.samples(args.grid)]
    text = json.dumps(doc, indent=2)
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.record_out:
        with open(args.record_out, "w") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")
    print(f"mean(gamma) = {rec.gamma.mean():.15g}", file=sys.stderr)
    return EXIT_OK


def _text_or_samples(f: PeriodicFn, grid: int):
    e = f.to_expr()
    return ep.to_text(e) if e is not None else [float(v) for v in f.samples(grid)]


def cmd_hb(args) -> int:
    prob = load_problem(args.input, parse_param_overrides(args.param))
    gamma = _canonical_gamma(prob, args.grid)
    steps = hb_sequence(center(gamma), args.order, HBOptions(newton_tol=args.newton_tol))
    rows = []
    for s in steps:
        if not s.ok:
            print(f"p_{s.order}: no solution ({s.error})")
            continue
        p = s.solution.p_n
        print(f"p_{s.order}: mu_{s.order} = {s.solution.mu_n:.12g}, "
              f"residual sup = {s.solution.residual_sup:.3e}")
        print(f"  {'k':>3} {'cos k t':>18} {'sin k t':>18}")
        for k in range(p.order):
            print(f"  {k + 1:>3} {p.a[k] + 0.0:>18.12f} {p.b[k] + 0.0:>18.12f}")
        for k in range(p.order):
            rows.append((s.order, s.solution.mu_n, k + 1, p.a[k], p.b[k]))
    _write_csv(args.out, ("order", "mu_n", "k", "cos_k", "sin_k"), rows)
    return EXIT_OK if any(s.ok for s in steps) else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riccati-disc",
                                 description="Periodic Riccati equations: discriminant bounds, "
                                             "harmonic balance and a Poincare-map oracle.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, order_default=None):
        p.add_argument("input", help="problem file (JSON)")
        p.add_argument("--param", action="append", metavar="NAME=VALUE",
                       help="override a parameter of the problem file")
        p.add_argument("--grid", type=int, default=1024, help="probe grid for reductions")
        p.add_argument("--newton-tol", type=float, default=1e-12)
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized checks (the pipeline itself is deterministic)")
        if order_default is not None:
            p.add_argument("--order", type=int, default=order_default)

    p = sub.add_parser("estimate", help="discriminant bracket from harmonic balance")
    common(p, 6)
    p.add_argument("--tau", type=float, default=1e-7, help="classification tolerance")
    p.add_argument("--out", help="CSV of per-order brackets")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("oracle", help="count cycles by integrating the equation")
    common(p)
    p.add_argument("--x-lo", type=float)
    p.add_argument("--x-hi", type=float)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--mu-offset", type=float, default=0.0)
    p.add_argument("--cycle-tol", type=float, default=1e-10)
    p.add_argument("--out", help="CSV of the displacement profile")
    p.add_argument("--cycles-out", help="CSV of located cycles")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("family", help="envelopes and eta bracket for an affine family")
    common(p, 3)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--points", type=int, default=5, help="number of equidistant anchors")
    g.add_argument("--intervals", type=int, help="split the range into this many parts "
                                                 "(intervals + 1 anchors)")
    p.add_argument("--anchors-out", help="CSV of anchor constants")
    p.add_argument("--envelope-out", help="CSV of the envelopes on 512 points")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("reduce", help="reduce a general equation to canonical form")
    common(p)
    p.add_argument("--u0", type=float, help="use the singular change of variables at u0")
    p.add_argument("--out", help="canonical problem file (default: stdout)")
    p.add_argument("--record-out", help="JSON with the change of variables")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("hb", help="harmonic-balance coefficient tables")
    common(p, 6)
    p.add_argument("--out", help="CSV with columns order, mu_n, k, cos_k, sin_k")
    p.set_defaults(func=cmd_hb)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (A2Vanishes, FVanishes) as exc:
        print(f"error: {exc} (t* = {exc.t_star:.12g})", file=sys.stderr)
        return EXIT_REDUCTION
    except (NonConvergence, ScanInconclusive, NoIntersection, SelfCheckFailed, CurveCrossing,
            ep.DomainError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
