import math
import time

import numpy as np
import pytest

from conftest import EX3_ETA_MIN
from riccati_disc.family import (AffineFamily, DegenerateDirection, NoIntersection, bifurcation_mu_star,
                                 concavity_report, equidistant, klm, scan)
from riccati_disc.functionals import Classification
from riccati_disc.harmonic_balance import hb_solve
from riccati_disc.oracle import count_cycles
from riccati_disc.periodic import PeriodicFn, TrigPoly
from riccati_disc.reduction import GeneralRiccati, reduce_nonvanishing

PAPER_LINE_PAIRS = [(0.479, -0.997), (0.498, -1.035), (0.505, -1.048), (0.496, -1.031), (0.471, -0.981)]
PAPER_TENT_PAIRS = [(1.442, -2.922), (1.219, -2.477), (1.045, -2.128), (0.907, -1.852), (0.934, -1.907)]
PAPER_P3_ETA0 = {"sin": [1.352, -0.416, 0.189]}


def ex3_gamma(eta):
    eq = GeneralRiccati.from_exprs("sin(t) - 2", "0", "eta - cos(t)", params={"eta": eta})
    return reduce_nonvanishing(eq).gamma


@pytest.fixture(scope="module")
def ex3():
    return AffineFamily.from_builder(ex3_gamma)


@pytest.fixture(scope="module")
def ex3_order3(ex3):
    return scan(ex3, np.linspace(EX3_ETA_MIN, 1.0, 5), 3)


def test_family_structure(ex3):
    assert ex3.d_bar == pytest.approx(-2.0, abs=1e-12)
    assert ex3.gamma_bar(1.0) == pytest.approx(0.25 - math.sqrt(3) / 6 - 2, abs=1e-10)
    assert ex3.s_inf == pytest.approx(1.0, abs=1e-9)
    t = np.linspace(0, 6, 11)
    np.testing.assert_allclose(ex3.gamma(0.7)(t), ex3_gamma(0.7)(t), atol=1e-12)
    np.testing.assert_allclose(ex3.gamma_hat(0.7).mean(), 0.0, atol=1e-12)


def test_non_affine_builder_rejected():
    with pytest.raises(ValueError):
        AffineFamily.from_builder(lambda e: PeriodicFn.from_expr(f"cos(t) * {e * e + 1}"))


def test_degenerate_direction():
    with pytest.raises(DegenerateDirection):
        AffineFamily(PeriodicFn.from_expr("cos(t)"), PeriodicFn.constant(0.0))


def test_klm_trivial_cases():
    fam = AffineFamily(PeriodicFn.from_expr("cos(t) - 1"), PeriodicFn.from_expr("sin(t) - 2"))
    a = klm(fam, 0.3, TrigPoly.zero(1))
    assert a.L == pytest.approx(0.0, abs=1e-14)
    assert a.M == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        klm(fam, 0.3, TrigPoly.constant(0.5))


def test_equidistant():
    g = equidistant(0.0, 1.0, 4)
    np.testing.assert_allclose(g, [0, 0.25, 0.5, 0.75, 1.0])


def test_order3_reproduces_paper(ex3_order3):
    res = ex3_order3
    assert res.eta_bracket.lo == pytest.approx(0.505, abs=2e-3)
    assert res.eta_bracket.hi == pytest.approx(0.907, abs=2e-3)
    for got, want in zip(res.line_pairs, PAPER_LINE_PAIRS):
        assert got == pytest.approx(want, abs=1e-3)
    for got, want in zip(res.tent_pairs, PAPER_TENT_PAIRS):
        assert got == pytest.approx(want, abs=1e-3)
    p = res.anchors[0].p
    assert list(p.b) == pytest.approx([1.352, -0.416, 0.189], abs=2e-3)


def test_anchor_invariants(ex3_order3):
    for a in ex3_order3.anchors:
        assert a.K <= a.upper(a.eta0) + 1e-9
        assert a.p.c0 == 0.0
    eta = np.linspace(EX3_ETA_MIN, 1.0, 101)
    assert np.all(ex3_order3.mu_lower_env(eta) <= ex3_order3.mu_upper_env(eta) + 1e-12)


def test_bracket_nested_under_refinement(ex3, ex3_order3):
    finer = scan(ex3, equidistant(EX3_ETA_MIN, 1.0, 20), 8)
    b0, b1 = ex3_order3.eta_bracket, finer.eta_bracket
    assert b0.lo - 1e-3 <= b1.lo <= b1.hi <= b0.hi + 1e-3
    assert b1.hi == pytest.approx(0.527, abs=2e-3)


def test_concurrent_scan_matches_serial(ex3, ex3_order3, monkeypatch):
    monkeypatch.setenv("RICCATI_DISC_THREADS", "4")
    par = scan(ex3, np.linspace(EX3_ETA_MIN, 1.0, 5), 3)
    assert par.eta_bracket == ex3_order3.eta_bracket
    monkeypatch.setenv("RICCATI_DISC_THREADS", "zero")
    with pytest.raises(ValueError):
        scan(ex3, np.linspace(EX3_ETA_MIN, 1.0, 5), 3)


def test_scan_validation(ex3):
    with pytest.raises(ValueError):
        scan(ex3, [0.5], 3)
    with pytest.raises(ValueError):
        scan(ex3, [0.5, 0.2], 3)


def test_no_intersection_outside_range(ex3):
    with pytest.raises(NoIntersection):
        scan(ex3, np.linspace(2.0, 3.0, 3), 3)


def test_concavity_report(ex3, ex3_order3):
    two = scan(ex3, [0.3, 1.5], 3)
    rep = concavity_report(two)
    assert not rep.ok and "insufficient" in rep.violations[0]
    etas = [a.eta0 for a in ex3_order3.anchors[1:4]]
    oracle = bifurcation_mu_star(ex3, etas)
    rep = concavity_report(ex3_order3, oracle)
    assert rep.ok, rep.violations
    for e, m in oracle:
        assert ex3_order3.mu_lower_env(e) <= m <= ex3_order3.mu_upper_env(e) + 1e-6


def test_sign_change_around_bracket(ex3, ex3_order3):
    b = ex3_order3.eta_bracket
    assert count_cycles(ex3.gamma(b.lo - 0.05))[0] is Classification.NO_CYCLES
    assert count_cycles(ex3.gamma(b.hi + 0.05))[0] is Classification.TWO_HYPERBOLIC
