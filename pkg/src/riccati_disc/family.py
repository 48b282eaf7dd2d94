"""Affine one-parameter families ``gamma_eta = base + eta * dir``.

For an anchor ``eta0`` with a zero-mean candidate ``p`` (the harmonic-balance
solution at ``eta0``):

* ``mu_upper(gamma_hat_eta, p) = L eta + M`` exactly, with
  ``L = -wmean(dir_hat)`` and ``M = wmean(p^2 - base_hat)`` for the weight
  ``exp(-2 int_0^t p)``;
* ``mu_lower(gamma_hat_eta, p) >= K - s_inf |eta - eta0|`` with
  ``K = mu_lower(gamma_hat_eta0, p)`` and ``s_inf = sup |dir_hat|``.

Taking the minimum of the lines and the maximum of the tents over all anchors
gives piecewise-linear envelopes around ``mu_star(eta)``. Comparing them with
the affine mean ``gamma_bar_eta`` brackets the parameter ``eta_star`` where the
discriminant changes sign.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .functionals import Bracket, mu_lower, weighted_means
from .harmonic_balance import HBOptions, HBSolution, NonConvergence, hb_sequence, hb_solve
from .periodic import PeriodicFn, TrigPoly, as_periodic, center

log = logging.getLogger(__name__)

ROOT_XTOL = 1e-10
AFFINE_RTOL = 1e-8
THREADS_ENV = "RICCATI_DISC_THREADS"


class NoIntersection(ArithmeticError):
    """The mean line never meets an envelope on the scan interval."""


class DegenerateDirection(ValueError):
    """The family direction vanishes identically."""


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


class AffineFamily:
    """``gamma_eta(t) = base(t) + eta * dir(t)`` with derived averages."""

    def __init__(self, base, direction):
        base = as_periodic(base)
        direction = as_periodic(direction, base.period)
        if not math.isclose(base.period, direction.period, rel_tol=1e-14):
            raise ValueError("base and direction must share the period")
        self.base = base
        self.dir = direction
        self.period = base.period
        self.b_bar = base.mean()
        self.d_bar = direction.mean()
        self.base_hat = center(base)
        self.dir_hat = center(direction)
        self.s_inf = self.dir_hat.sup_norm()
        if direction.sup_norm() == 0.0:
            raise DegenerateDirection("family direction is identically zero (s_inf = 0)")

    @classmethod
    def from_builder(cls, gamma_of: Callable[[float], PeriodicFn]) -> "AffineFamily":
        """Recover ``base`` and ``dir`` from ``eta -> gamma_eta`` and check affinity."""
        g0, g1, g2 = gamma_of(0.0), gamma_of(1.0), gamma_of(2.0)
        fam = cls(g0, g1 - g0)
        n = 512
        lhs = g2.samples(n) - g0.samples(n)
        rhs = 2.0 * fam.dir.samples(n)
        if np.max(np.abs(lhs - rhs)) > AFFINE_RTOL * (1.0 + np.max(np.abs(rhs))):
            raise ValueError("gamma is not affine in the family parameter")
        return fam

    def gamma(self, eta: float) -> PeriodicFn:
        return self.base + self.dir * float(eta)

    def gamma_hat(self, eta: float) -> PeriodicFn:
        return self.base_hat + self.dir_hat * float(eta)

    def gamma_bar(self, eta):
        return self.b_bar + self.d_bar * np.asarray(eta, dtype=float)


@dataclass(frozen=True, eq=False)
class AnchorData:
    eta0: float
    order: int
    p: TrigPoly
    K: float
    L: float
    M: float
    mu_n: float | None = None
    fallback: bool = False  # p borrowed from a neighbouring anchor

    def upper(self, eta):
        return self.L * np.asarray(eta, dtype=float) + self.M

    def lower(self, eta, s_inf: float):
        return self.K - s_inf * np.abs(np.asarray(eta, dtype=float) - self.eta0)


@dataclass(frozen=True, eq=False)
class FamilyScanResult:
    family: AffineFamily
    anchors: list[AnchorData]
    eta_bracket: Bracket
    line_pairs: list[tuple[float, float]] = field(default_factory=list)
    tent_pairs: list[tuple[float, float]] = field(default_factory=list)
    skipped: list[float] = field(default_factory=list)

    def mu_upper_env(self, eta):
        eta = np.asarray(eta, dtype=float)
        return np.min([a.upper(eta) for a in self.anchors], axis=0)

    def mu_lower_env(self, eta):
        eta = np.asarray(eta, dtype=float)
        s = self.family.s_inf
        return np.max([a.lower(eta, s) for a in self.anchors], axis=0)


def klm(family: AffineFamily, eta0: float, p, order: int | None = None,
        mu_n: float | None = None, fallback: bool = False) -> AnchorData:
    """Anchor constants ``K, L, M`` for candidate ``p`` at ``eta0``."""
    if not isinstance(p, TrigPoly):
        body = as_periodic(p).body
        if not isinstance(body, TrigPoly):
            raise TypeError("p must be a trig polynomial")
        p = body
    if abs(p.c0) > 1e-10:
        raise ValueError(f"p must have zero average, got mean {p.c0:.3e}")
    eta0 = float(eta0)
    K = mu_lower(family.gamma_hat(eta0), p)
    base_hat, dir_hat = family.base_hat, family.dir_hat
    wd, wm = weighted_means(p, [dir_hat, lambda t: p(t) ** 2 - base_hat(t)])
    return AnchorData(eta0=eta0, order=order if order is not None else p.order, p=p,
                      K=float(K), L=-float(wd), M=float(wm), mu_n=mu_n, fallback=fallback)


def _solve_anchor(family: AffineFamily, eta0: float, order: int,
                  opts: HBOptions) -> HBSolution | None:
    steps = hb_sequence(family.gamma_hat(eta0), order, opts, brackets=False)
    last = steps[-1]
    return last.solution if last.ok else None


def equidistant(lo: float, hi: float, intervals: int) -> np.ndarray:
    """``intervals + 1`` anchors splitting ``[lo, hi]`` into equal parts."""
    if intervals < 1:
        raise ValueError("need at least one interval")
    return lo + (hi - lo) * np.arange(intervals + 1) / intervals


def _bisect(f: Callable[[float], float], a: float, b: float, xtol: float = ROOT_XTOL) -> float:
    fa = f(a)
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _region_edges(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                  breakpoints: Sequence[float], want_negative: bool) -> list[tuple[float, float]]:
    """Maximal sub-intervals of ``[lo, hi]`` where ``f < 0`` (or ``f > 0``).

    ``f`` is piecewise linear with kinks at ``breakpoints`` plus the kinks
    found by sampling; each edge is refined by bisection.
    """
    grid = np.unique(np.concatenate((np.linspace(lo, hi, 2001),
                                     [b for b in breakpoints if lo < b < hi])))
    v = np.asarray(f(grid), dtype=float)
    inside = v < 0 if want_negative else v > 0
    out = []
    j = 0
    while j < grid.size:
        if not inside[j]:
            j += 1
            continue
        k = j
        while k + 1 < grid.size and inside[k + 1]:
            k += 1
        fs = lambda x: float(f(np.array([x]))[0])
        left = grid[0] if j == 0 else _bisect(fs, grid[j - 1], grid[j])
        right = grid[-1] if k == grid.size - 1 else _bisect(fs, grid[k], grid[k + 1])
        out.append((float(left), float(right)))
        j = k + 1
    return out


def eta_bracket(family: AffineFamily, anchors: Sequence[AnchorData],
                lo: float, hi: float) -> Bracket:
    """Bracket of ``eta_star`` from the envelopes on ``[lo, hi]``.

    Where ``mu_U - gamma_bar < 0`` the discriminant is certainly negative and
    where ``mu_L - gamma_bar > 0`` it is certainly positive; ``eta_star``
    lies in the gap between the two regions.
    """
    s = family.s_inf

    def du(eta):
        return np.min([a.upper(eta) for a in anchors], axis=0) - family.gamma_bar(eta)

    def dl(eta):
        return np.max([a.lower(eta, s) for a in anchors], axis=0) - family.gamma_bar(eta)

    kinks = [a.eta0 for a in anchors]
    neg = _region_edges(du, lo, hi, kinks, want_negative=True)
    pos = _region_edges(dl, lo, hi, kinks, want_negative=False)
    if not neg or not pos:
        which = "upper" if not neg else "lower"
        raise NoIntersection(f"mean line does not cross the {which} envelope on [{lo}, {hi}]")
    if neg[-1][1] <= pos[0][0]:
        return Bracket(neg[-1][1], pos[0][0])
    if pos[-1][1] <= neg[0][0]:
        return Bracket(pos[-1][1], neg[0][0])
    raise NoIntersection("envelope regions interleave; the discriminant is not unimodal here")


def line_intersections(family: AffineFamily, anchors: Sequence[AnchorData]) -> list[tuple[float, float]]:
    """Per-anchor solutions of ``gamma_bar_eta = L eta + M`` with their mean images."""
    out = []
    for a in anchors:
        den = family.d_bar - a.L
        eta = (a.M - family.b_bar) / den if den != 0 else math.nan
        out.append((eta, float(family.gamma_bar(eta))))
    return out


def tent_intersections(family: AffineFamily, anchors: Sequence[AnchorData]) -> list[tuple[float, float]]:
    """Per-anchor solutions of ``gamma_bar_eta = K - s_inf |eta - eta0|``.

    Each branch of the tent is tried; when both meet the line, the crossing
    on the side where the mean is larger is kept.
    """
    s, b, d = family.s_inf, family.b_bar, family.d_bar
    out = []
    for a in anchors:
        cands = []
        for sg in (1.0, -1.0):  # K - sg*s*(eta - eta0) on the side sign(eta - eta0) == sg
            den = d + sg * s
            if den == 0:
                continue
            eta = (a.K + sg * s * a.eta0 - b) / den
            if sg * (eta - a.eta0) >= -1e-14:
                cands.append(eta)
        if not cands:
            out.append((math.nan, math.nan))
            continue
        # the crossing that enters the region where the tent exceeds the mean
        eta = max(cands) if d > 0 else min(cands)
        out.append((eta, float(family.gamma_bar(eta))))
    return out


def scan(family: AffineFamily, eta_grid: Sequence[float], order: int,
         opts: HBOptions | None = None, workers: int | None = None) -> FamilyScanResult:
    """Anchor constants on ``eta_grid`` at HB order ``order`` and the eta bracket."""
    opts = opts or HBOptions()
    grid = [float(e) for e in eta_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("eta grid must be strictly increasing with at least 2 points")
    if order < 1:
        raise ValueError("order must be at least 1")
    workers = workers or _max_workers()

    def solve(eta):
        return _solve_anchor(family, eta, order, opts)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(solve, grid))
    else:
        sols = [solve(eta) for eta in grid]

    anchors, skipped = [], []
    for i, (eta, sol) in enumerate(zip(grid, sols)):
        fallback = False
        if sol is None:
            sol, fallback = _fallback(family, grid, sols, i, order, opts)
        if sol is None:
            log.warning("anchor eta=%g skipped: harmonic balance failed", eta)
            skipped.append(eta)
            continue
        anchors.append(klm(family, eta, sol.p_n, order, None if fallback else sol.mu_n, fallback))
    if not anchors:
        raise NonConvergence(order, math.inf, 0)
    for a in anchors:
        if a.K > a.upper(a.eta0) + 1e-9:
            raise ArithmeticError(f"anchor {a.eta0}: K={a.K} exceeds upper line {a.upper(a.eta0)}")
    br = eta_bracket(family, anchors, grid[0], grid[-1])
    return FamilyScanResult(family, anchors, br, line_intersections(family, anchors),
                            tent_intersections(family, anchors), skipped)


def _fallback(family, grid, sols, i, order, opts):
    """Warm-start from the nearest converged anchor, else borrow its ``p``."""
    order_idx = sorted((j for j in range(len(grid)) if sols[j] is not None),
                       key=lambda j: abs(grid[j] - grid[i]))
    if not order_idx:
        return None, False
    near = sols[order_idx[0]]
    try:
        return hb_solve(family.gamma_hat(grid[i]), order, init=near, opts=opts), False
    except NonConvergence:
        return near, True


@dataclass(frozen=True)
class ConcavityReport:
    ok: bool
    violations: list[str]
    oracle_mu: list[tuple[float, float]] = field(default_factory=list)


def concavity_report(result: FamilyScanResult, oracle_mu: Sequence[tuple[float, float]] | None = None,
                     tol: float = 1e-4, sandwich_slack: float = 1e-6) -> ConcavityReport:
    """Structural concavity of the upper envelope and checks on oracle samples.

    ``oracle_mu`` holds ``(eta, mu_star)`` pairs, e.g. from
    :func:`bifurcation_mu_star`; they must sit between the envelopes and form
    a concave sequence within ``tol``.
    """
    viol: list[str] = []
    if len(result.anchors) < 3:
        return ConcavityReport(False, ["insufficient for concavity sequence check (need 3 anchors)"],
                               list(oracle_mu or []))
    # min of affine functions: second differences on any grid are <= 0
    eta = np.linspace(result.anchors[0].eta0, result.anchors[-1].eta0, 257)
    u = result.mu_upper_env(eta)
    if np.max(u[:-2] - 2 * u[1:-1] + u[2:]) > 1e-12 * (1 + np.max(np.abs(u))):
        viol.append("upper envelope not concave")
    pts = sorted(oracle_mu or [])
    for e, m in pts:
        lo = float(result.mu_lower_env(e))
        hi = float(result.mu_upper_env(e))
        if not (lo - sandwich_slack <= m <= hi + sandwich_slack):
            viol.append(f"oracle mu*({e:.6g})={m:.9g} outside [{lo:.9g}, {hi:.9g}]")
    for (e0, m0), (e1, m1), (e2, m2) in zip(pts, pts[1:], pts[2:]):
        # chord test: the middle point must lie above the chord of its neighbours
        chord = m0 + (m2 - m0) * (e1 - e0) / (e2 - e0)
        if m1 < chord - tol:
            viol.append(f"oracle samples not concave at eta={e1:.6g} (below chord by {chord - m1:.3e})")
    return ConcavityReport(not viol, viol, pts)


def bifurcation_mu_star(family: AffineFamily, etas: Sequence[float], **kw) -> list[tuple[float, float]]:
    """Oracle midpoints of the saddle-node parameter at each ``eta``."""
    from .oracle import bifurcation_scan

    out = []
    for e in etas:
        res = bifurcation_scan(family.gamma_hat(e), **kw)
        out.append((float(e), res.bracket.mid))
    return out
