"""Two-sided bounds on the saddle-node parameter and the discriminant.

For a zero-mean ``gamma_hat`` and the family ``x' = x^2 + gamma_hat(t) + mu``:

* ``mu_lower(p) = -max_t (p^2 + gamma_hat - p')`` for any periodic ``p``;
* ``mu_upper(q)`` is the mean of ``q^2 - gamma_hat`` weighted by
  ``exp(-2 int_0^t q)``, for zero-mean ``q``;

and ``mu_lower(p) <= mu_star <= mu_upper(q) <= 0``. The discriminant of
``x' = x^2 + gamma`` is ``mu_star - mean(gamma)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .periodic import (DEFAULT_SAMPLES, QUAD_MAX_SAMPLES, QUAD_RTOL, PeriodicFn,
                       TrigPoly, as_periodic, center)

MAX_GRID = 4096
REFINE_TOL = 1e-10
ZERO_MEAN_TOL = 1e-10
CLASSIFY_TAU = 1e-7
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"bracket ends must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"bracket is reversed: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def shifted(self, d: float) -> "Bracket":
        return Bracket(self.lo + d, self.hi + d)

    def intersect(self, other: "Bracket") -> "Bracket":
        """Common part; touching ends within rounding collapse to a point."""
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            if lo - hi > 1e-9 * (1.0 + abs(lo)):
                raise ArithmeticError(f"disjoint brackets {self} and {other}")
            lo = hi = 0.5 * (lo + hi)
        return Bracket(lo, hi)

    def __iter__(self):
        return iter((self.lo, self.hi))


class Classification(str, enum.Enum):
    TWO_HYPERBOLIC = "TwoHyperbolic"
    ONE_DOUBLE = "OneDouble"
    NO_CYCLES = "NoCycles"
    UNDETERMINED = "Undetermined"
    # only reachable for general Riccati equations with vanishing a2
    ONE_HYPERBOLIC = "OneHyperbolic"

    def __str__(self) -> str:
        return self.value


def _as_fn(p) -> PeriodicFn:
    return p if isinstance(p, PeriodicFn) else as_periodic(p)


def golden_max(f: Callable[[float], float], lo: float, hi: float,
               tol: float = REFINE_TOL) -> tuple[float, float]:
    """Golden-section search for a maximum of a unimodal ``f`` on [lo, hi]."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def grid_max(g: Callable, period: float, n_grid: int = MAX_GRID,
             refine_tol: float = REFINE_TOL, n_candidates: int = 8) -> tuple[float, float]:
    """Maximum of a periodic ``g`` over one period: grid scan plus refinement.

    The best few local maxima of the sample are each refined by golden-section
    search on their neighbouring grid cells.
    """
    h = period / n_grid
    t = np.arange(n_grid) * h
    v = np.asarray(g(t), dtype=float)
    if not np.all(np.isfinite(v)):
        raise ArithmeticError("non-finite value in maximization")
    is_peak = (v >= np.roll(v, 1)) & (v >= np.roll(v, -1))
    peaks = np.flatnonzero(is_peak)
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(v))])
    peaks = peaks[np.argsort(v[peaks])[::-1][:n_candidates]]
    best_t, best_v = float(t[int(np.argmax(v))]), float(np.max(v))
    scalar = lambda s: float(g(np.array([s]))[0])
    for j in peaks:
        tj, vj = golden_max(scalar, t[j] - h, t[j] + h, refine_tol)
        if vj > best_v:
            best_t, best_v = tj, vj
    return best_t % period, best_v


def mu_lower(gamma_hat, p, refine_tol: float = REFINE_TOL, n_grid: int = MAX_GRID) -> float:
    """``-max_t (p(t)^2 + gamma_hat(t) - p'(t))``; ``p`` need not have zero mean."""
    gamma_hat = _as_fn(gamma_hat)
    p_fn = _as_fn(p)
    dp = p_fn.derivative()

    def g(t):
        pv = p_fn(t)
        return pv * pv + gamma_hat(t) - dp(t)

    return -grid_max(g, gamma_hat.period, n_grid, refine_tol)[1]


def _weight_log(q: TrigPoly) -> TrigPoly:
    """``-2 int_0^t q`` as a trig polynomial (requires zero mean)."""
    if abs(q.c0) > ZERO_MEAN_TOL:
        raise ValueError(f"q must have zero average, got mean {q.c0:.3e}")
    q0 = TrigPoly(q.period, 0.0, q.a, q.b)
    return -2.0 * q0.integral_from_zero()


def weighted_means(q, funcs: Sequence[Callable], n_samples: int = DEFAULT_SAMPLES,
                   rtol: float = QUAD_RTOL, max_samples: int = QUAD_MAX_SAMPLES) -> np.ndarray:
    """Means of ``funcs`` over one period weighted by ``exp(-2 int_0^t q)``.

    The inner integral is the exact antiderivative of the trig polynomial
    ``q``; the outer integrals use the periodic trapezoid rule with grid
    doubling until every ratio is stable to ``rtol``.
    """
    if not isinstance(q, TrigPoly):
        q = _as_fn(q).body
        if not isinstance(q, TrigPoly):
            raise TypeError("q must be a trig polynomial")
    period = q.period
    logw = _weight_log(q)
    shift = logw.c0 + float(np.sum(np.hypot(logw.a, logw.b)))  # upper bound of logw

    def sums(t):
        w = np.exp(logw(t) - shift)
        return np.array([np.sum(w)] + [np.sum(w * f(t)) for f in funcs])

    n = int(n_samples)
    tot = sums(np.arange(n) * period / n)
    ratio = tot[1:] / tot[0]
    while True:
        tot = tot + sums((np.arange(n) + 0.5) * period / n)
        n *= 2
        new = tot[1:] / tot[0]
        scale = np.maximum(np.abs(new), 1.0)
        if np.all(np.abs(new - ratio) <= rtol * scale) or n >= max_samples:
            return new
        ratio = new


def mu_upper(gamma_hat, q) -> float:
    """Weighted mean of ``q^2 - gamma_hat`` with weight ``exp(-2 int_0^t q)``."""
    gamma_hat = _as_fn(gamma_hat)
    q = q if isinstance(q, TrigPoly) else _as_fn(q).body
    if not isinstance(q, TrigPoly):
        raise TypeError("q must be a trig polynomial")
    return float(weighted_means(q, [lambda t: q(t) ** 2 - gamma_hat(t)])[0])


def mu_bracket(gamma_hat, q) -> Bracket:
    """``[mu_lower(q), min(mu_upper(q), 0)]``: an enclosure of the saddle-node parameter.

    ``mu_upper`` can be positive for a poor ``q``; the cap is ``mu_upper`` at
    ``q = 0``, which equals ``-mean(gamma_hat) = 0``.
    """
    lo = mu_lower(gamma_hat, q)
    hi = min(mu_upper(gamma_hat, q), 0.0)
    if lo > hi + 1e-9:
        raise ArithmeticError(f"bound ordering violated: lo={lo!r}, hi={hi!r}")
    return Bracket(min(lo, hi), hi)


def classify_delta(delta: Bracket, tau: float = CLASSIFY_TAU) -> Classification:
    if delta.lo > tau:
        return Classification.TWO_HYPERBOLIC
    if delta.hi < -tau:
        return Classification.NO_CYCLES
    if abs(delta.lo) <= tau and abs(delta.hi) <= tau:
        return Classification.ONE_DOUBLE
    return Classification.UNDETERMINED


def discriminant(gamma, q, tau: float = CLASSIFY_TAU) -> tuple[Bracket, Classification]:
    """Bracket of the discriminant of ``x' = x^2 + gamma`` and its verdict."""
    gamma = _as_fn(gamma)
    gbar = gamma.mean()
    delta = mu_bracket(center(gamma), q).shifted(-gbar)
    return delta, classify_delta(delta, tau)
