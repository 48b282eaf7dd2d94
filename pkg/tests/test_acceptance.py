"""Acceptance checks, one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline, or
``python3 tests/test_acceptance.py`` for the lines alone. The lines are also
repeated in the pytest terminal summary.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import EX1_GAMMA, EX3_ETA_MIN  # noqa: E402
from riccati_disc.family import AffineFamily, equidistant, scan  # noqa: E402
from riccati_disc.functionals import (Classification, classify_delta, discriminant,  # noqa: E402
                                      mu_lower, mu_upper)
from riccati_disc.harmonic_balance import best_bracket, hb_sequence  # noqa: E402
from riccati_disc.oracle import bifurcation_scan, count_cycles, integrate  # noqa: E402
from riccati_disc.periodic import TWO_PI, PeriodicFn, TrigPoly, center  # noqa: E402
from riccati_disc.reduction import GeneralRiccati, reduce_nonvanishing  # noqa: E402

RESULTS: list[str] = []
SEED = 20240601


def report(tag: str, ok: bool, detail: str, status: str | None = None) -> bool:
    line = f"[{status or ('PASS' if ok else 'FAIL')}] {tag}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def random_trig(rng, max_order, scale, zero_mean=True):
    n = int(rng.integers(0, max_order + 1))
    c0 = 0.0 if zero_mean else float(rng.uniform(-scale, scale))
    return TrigPoly(TWO_PI, c0, rng.uniform(-scale, scale, n), rng.uniform(-scale, scale, n))


def ex3_gamma(eta):
    eq = GeneralRiccati.from_exprs("sin(t) - 2", "0", "eta - cos(t)", params={"eta": eta})
    return reduce_nonvanishing(eq).gamma


# ---------------------------------------------------------------------------

def criterion_1():
    lows = [-3.333, -1.960, -1.430, -1.174, -1.067, -1.025]
    highs = [-0.4897, -0.9594, -0.9953, -0.9995, -1.000, -1.000]
    t0 = time.perf_counter()
    steps = hb_sequence(center(PeriodicFn.from_expr(EX1_GAMMA)), 6)
    elapsed = time.perf_counter() - t0
    errs = [max(abs(s.bracket.lo - lo), abs(s.bracket.hi - hi))
            for s, lo, hi in zip(steps, lows, highs)]
    contain = all(s.bracket.contains(-1.0, 1e-12) for s in steps[-2:])
    ok = all(s.ok for s in steps) and max(errs) <= 5e-4 and contain and elapsed < 10
    return report("C1 Example 1 bound table", ok,
                  f"max |bound - paper| = {max(errs):.2e} (tol 5e-4), final brackets contain -1: "
                  f"{contain}, {elapsed:.2f}s (limit 10s)")


def criterion_2():
    t0 = time.perf_counter()
    sin_t = TrigPoly.from_terms(sin={1: 1.0})
    steps = hb_sequence(sin_t, 6)
    p1 = steps[0].solution.p_n
    p1_ok = bool(np.all(np.abs(p1.to_vector() - [0.0, -1.0, 0.0]) < 1e-14))
    r = np.roots([1, 0, 4, 4])
    w = float(r[np.argmin(np.abs(r.imag))].real)
    p2 = steps[1].solution.p_n
    p2_ok = (abs(w + 0.8477075981) < 1e-9 and abs(p2.a[0] - w) < 1e-9
             and abs(p2.b[1] - w * w / 4) < 1e-9 and abs(p2.a[1]) < 1e-9 and abs(p2.b[0]) < 1e-9)
    b6 = steps[5].bracket
    hb_ok = -0.3802 <= b6.lo and b6.hi <= -0.3784
    orc = bifurcation_scan(sin_t).bracket
    orc_ok = orc.width <= 1e-6 and -0.3801 <= orc.lo and orc.hi <= -0.3785
    elapsed = time.perf_counter() - t0
    ok = p1_ok and p2_ok and hb_ok and orc_ok and elapsed < 30
    return report("C2 Example 2", ok,
                  f"p1 exact: {p1_ok}, p2 vs omega: {p2_ok}, order-6 bracket "
                  f"[{b6.lo:.6f}, {b6.hi:.6f}] within [-0.3802, -0.3784]: {hb_ok}, oracle "
                  f"[{orc.lo:.8f}, {orc.hi:.8f}] (width {orc.width:.1e}) within "
                  f"[-0.3801, -0.3785]: {orc_ok}, {elapsed:.1f}s (limit 30s)")


def criterion_3():
    gamma = PeriodicFn.from_expr("-1 + cos(t) + cos(2*t)/2")
    d, cls = discriminant(gamma, TrigPoly.from_terms(sin={1: 1.0}))
    ocls, cycles = count_cycles(gamma)
    ok = (abs(d.lo - 0.5) <= 1e-9 and abs(d.hi - 0.5) <= 1e-9
          and cls is Classification.TWO_HYPERBOLIC and ocls is Classification.TWO_HYPERBOLIC)
    return report("C3 ex0 discriminant", ok,
                  f"delta = [{d.lo:.12f}, {d.hi:.12f}], {cls}; oracle {ocls} with h = "
                  + ", ".join(f"{c.h:.4f}" for c in cycles))


def criterion_4():
    means = [abs(ex3_gamma(e).mean() - (0.25 - math.sqrt(3) / 6 - 2 * e)) for e in (0.0, 0.5, 1.0)]
    fam = AffineFamily.from_builder(ex3_gamma)
    r3 = scan(fam, np.linspace(EX3_ETA_MIN, 1.0, 5), 3)
    pairs = [(0.479, -0.997), (0.498, -1.035), (0.505, -1.048), (0.496, -1.031), (0.471, -0.981)]
    pair_err = max(max(abs(g[0] - w[0]), abs(g[1] - w[1])) for g, w in zip(r3.line_pairs, pairs))
    t0 = time.perf_counter()
    r15 = scan(fam, equidistant(EX3_ETA_MIN, 1.0, 30), 15)
    t15 = time.perf_counter() - t0
    b3, b15 = r3.eta_bracket, r15.eta_bracket
    ok = (max(means) <= 1e-10
          and abs(b3.lo - 0.505) <= 2e-3 and abs(b3.hi - 0.907) <= 2e-3
          and abs(b15.lo - 0.507) <= 2e-3 and abs(b15.hi - 0.514) <= 2e-3
          and pair_err <= 1e-3 and t15 < 300)
    return report("C4 Example 3 family", ok,
                  f"mean error {max(means):.1e}; order 3 / 5 anchors [{b3.lo:.4f}, {b3.hi:.4f}]; "
                  f"order 15 / 30 intervals [{b15.lo:.4f}, {b15.hi:.4f}] in {t15:.1f}s; "
                  f"anchor pairs max error {pair_err:.1e}")


def criterion_4_literal_grid():
    """Informational: 30 anchors placed with ``linspace`` (29 intervals)."""
    fam = AffineFamily.from_builder(ex3_gamma)
    b = scan(fam, np.linspace(EX3_ETA_MIN, 1.0, 30), 15).eta_bracket
    ok = abs(b.lo - 0.507) <= 2e-3 and abs(b.hi - 0.514) <= 2e-3
    report("C4 order 15 with 30 linspace anchors", ok,
           f"[{b.lo:.4f}, {b.hi:.4f}], within 2e-3 of [0.507, 0.514]: {ok}", status="INFO")
    return True


def criterion_5a():
    rng = np.random.default_rng(SEED)
    bad_order = bad_sign = 0
    worst = -math.inf
    for _ in range(500):
        g, p, q = random_trig(rng, 6, 2.0), random_trig(rng, 6, 1.5, False), random_trig(rng, 6, 1.5)
        lo, hi = mu_lower(g, p), mu_upper(g, q)
        bad_order += lo > hi + 1e-9
        bad_sign += hi > 1e-9
        worst = max(worst, hi)
    ok = bad_order == 0 and bad_sign == 0
    return report("C5a functional inequality (500 triples)", ok,
                  f"lower > upper in {bad_order} cases; upper > 0 in {bad_sign} cases "
                  f"(largest upper value {worst:.4f})")


def criterion_5b():
    rng = np.random.default_rng(SEED + 1)
    worst, count = 0.0, 0
    t = np.arange(512) * TWO_PI / 512
    for _ in range(40):
        for s in hb_sequence(random_trig(rng, 4, 1.5), 6):
            if s.ok:
                count += 1
                worst = max(worst, abs(s.solution.mu_n + np.mean(s.solution.p_n(t) ** 2)))
    return report("C5b constant-mode identity", worst <= 1e-9,
                  f"max |mu_n + mean(p_n^2)| = {worst:.1e} over {count} converged solutions")


def _oracle_cases():
    rng = np.random.default_rng(SEED + 2)
    out = []
    for _ in range(100):
        g = random_trig(rng, 4, 2.0, zero_mean=False)
        out.append((g, *count_cycles(PeriodicFn(g))))
    return out


def criterion_5c_5d():
    cases = _oracle_cases()
    compared = disagree = 0
    worst_h = worst_mu = 0.0
    sign_bad = 0
    for g, cls, cycles in cases:
        b = best_bracket(hb_sequence(center(PeriodicFn(g)), 6))
        verdict = classify_delta(b.shifted(-g.c0))
        if verdict in (Classification.TWO_HYPERBOLIC, Classification.NO_CYCLES):
            compared += 1
            disagree += cls is not verdict
        for c in cycles:
            worst_h = max(worst_h, abs(c.h - 2 * TWO_PI * c.mean))
            worst_mu = max(worst_mu, abs(g.c0 + c.mean_sq))
            if c.stability != "semistable" and np.sign(c.h) != np.sign(c.mean):
                sign_bad += 1
    n_cycles = sum(len(c) for _, _, c in cases)
    ok_c = report("C5c oracle vs discriminant (100 random gamma)", disagree == 0,
                  f"{compared} cases with a decisive bracket, {disagree} disagreements")
    ok_d = report("C5d zero-average and mean-square checks", sign_bad == 0 and worst_mu < 1e-6
                  and worst_h <= 1e-6,
                  f"{n_cycles} cycles: sign mismatches {sign_bad}, "
                  f"max |h - 2T mean| {worst_h:.1e}, max |mean(gamma) + mean(phi^2)| {worst_mu:.1e}")
    return ok_c and ok_d


def criterion_5e():
    rng = np.random.default_rng(SEED + 3)
    same = skipped = 0
    mismatches = []
    for _ in range(50):
        w = random_trig(rng, 2, 0.4)
        sign = rng.choice([-1.0, 1.0])
        a2 = TrigPoly(TWO_PI, sign * (rng.uniform(0.5, 2.0) + np.sum(np.abs(w.a) + np.abs(w.b))), w.a, w.b)
        eq = GeneralRiccati(TWO_PI, PeriodicFn(a2), PeriodicFn(random_trig(rng, 2, 1.0, False)),
                            PeriodicFn(random_trig(rng, 2, 1.5, False)))
        direct = count_cycles(eq)[0]
        reduced = count_cycles(reduce_nonvanishing(eq).gamma)[0]
        if Classification.ONE_DOUBLE in (direct, reduced):
            skipped += 1
        elif direct is reduced:
            same += 1
        else:
            mismatches.append((direct, reduced))
    return report("C5e reduction preserves cycle count (50 equations)", not mismatches,
                  f"{same} equal, {len(mismatches)} different, {skipped} tangencies skipped")


def criterion_5f():
    v = PeriodicFn.from_expr("2 + cos(t)")
    eq = GeneralRiccati(TWO_PI, v - v.derivative(), PeriodicFn.constant(-1.0), PeriodicFn.constant(0.0))
    cls, cycles = count_cycles(reduce_nonvanishing(eq).gamma)
    hs = [c.h for c in cycles]
    ok = (cls is Classification.TWO_HYPERBOLIC and len(hs) == 2
          and abs(hs[0] + TWO_PI) <= 1e-4 and abs(hs[1] - TWO_PI) <= 1e-4)
    return report("C5f uve fixture with v = 2 + cos t", ok,
                  f"{cls}, h = " + ", ".join(f"{h:.8f}" for h in hs) + " (expected -T, +T)")


def criterion_6():
    C = PeriodicFn.constant
    cls_m1, cyc = count_cycles(C(-1.0))
    e1 = max(abs(cyc[0].x0 + 1), abs(cyc[1].x0 - 1)) if len(cyc) == 2 else math.inf
    cls_0, cyc0 = count_cycles(C(0.0))
    cls_1, _ = count_cycles(C(1.0))
    t_err = max(abs(integrate(C(-1.0), 0.0, 0.0, 0.0, t).x_end + math.tanh(t)) for t in (0.5, 1, 3))
    tan_err = max(abs(integrate(C(1.0), 0.0, 0.0, 0.0, t).x_end - math.tan(t)) / max(1, math.tan(t))
                  for t in (0.5, 1.0, 1.4))
    esc = integrate(C(1.0), 0.0, 0.0, 0.0, 2.0)
    ok = (cls_m1 is Classification.TWO_HYPERBOLIC and e1 < 1e-8
          and cls_0 is Classification.ONE_DOUBLE and cyc0[0].x0 == 0.0
          and cls_1 is Classification.NO_CYCLES and t_err < 1e-8 and tan_err < 1e-8
          and esc.escaped and esc.t_escape < math.pi / 2)
    return report("C6 closed-form oracle checks", ok,
                  f"cycles at +-1 error {e1:.1e}; gamma=0 {cls_0}; gamma=1 {cls_1}; "
                  f"tanh error {t_err:.1e}; tan relative error {tan_err:.1e}; "
                  f"escape at t={esc.t_escape:.8f}")


# ---------------------------------------------------------------------------

def test_c1_example1_table():
    assert criterion_1()


def test_c2_example2():
    assert criterion_2()


def test_c3_ex0():
    assert criterion_3()


def test_c4_example3_family():
    assert criterion_4()


def test_c4_literal_anchor_grid_info():
    # the literal reading is reported but not required (see README)
    criterion_4_literal_grid()


def test_c5a_functional_inequality():
    assert criterion_5a()


def test_c5b_constant_mode():
    assert criterion_5b()


def test_c5c_c5d_oracle_agreement():
    assert criterion_5c_5d()


def test_c5e_reduction_count():
    assert criterion_5e()


def test_c5f_uve_fixture():
    assert criterion_5f()


def test_c6_closed_forms():
    assert criterion_6()


if __name__ == "__main__":
    checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_4_literal_grid,
              criterion_5a, criterion_5b, criterion_5c_5d, criterion_5e, criterion_5f, criterion_6]
    results = [f() for f in checks]
    sys.exit(0 if all(results) else 1)
