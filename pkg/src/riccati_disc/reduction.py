"""Reduction of general periodic Riccati equations to ``x' = x^2 + gamma(t)``.

Two changes of variables are provided.

* ``a2`` never vanishes: ``y = a2 x + A`` with ``A = (a1 + a2'/a2) / 2`` gives
  ``gamma = a2 a0 - A^2 + A'``.
* a constant ``u0`` with ``f(t, u0) != 0`` for all ``t`` (singular change):
  ``x = m/(u - u0) + n`` with ``m = -f(t, u0)`` and
  ``n = (f_t(t, u0) - f_u(t, u0) f(t, u0)) / (2 f(t, u0))``. Writing
  ``F = f(t, u0)`` the transformed equation is ``x' = x^2 + a2 F + n' - n^2``.

Coefficient derivatives are exact (symbolic for expressions, term-wise for
trig polynomials); only opaque callables fall back to a Fourier projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import exprparse as ep
from .periodic import TWO_PI, PeriodicFn, as_periodic

DEFAULT_GRID = 1024
VANISH_RTOL = 1e-8
CURVE_MARGIN = 1e-8
SELF_CHECK_TOL = 1e-6
PROJECTION_ORDER = 64


class _VanishingError(ArithmeticError):
    what = "coefficient"

    def __init__(self, t_star: float):
        super().__init__(f"{self.what} vanishes near t = {t_star:.12g}")
        self.t_star = float(t_star)


class A2Vanishes(_VanishingError):
    what = "a2"


class FVanishes(_VanishingError):
    what = "f(t, u0)"


class CurveCrossing(ArithmeticError):
    def __init__(self, t_star: float):
        super().__init__(f"trajectory meets the excluded curve at t = {t_star:.12g}")
        self.t_star = float(t_star)


class SelfCheckFailed(ArithmeticError):
    """The transformed trajectory does not satisfy the canonical equation."""


def _fn(f, period: float) -> PeriodicFn:
    f = as_periodic(f, period)
    if not math.isclose(f.period, period, rel_tol=1e-14):
        raise ValueError(f"coefficient period {f.period} differs from {period}")
    return f


@dataclass(frozen=True, eq=False)
class GeneralRiccati:
    """``u' = a2(t) u^2 + a1(t) u + a0(t)`` with a common period."""
    period: float
    a2: PeriodicFn
    a1: PeriodicFn
    a0: PeriodicFn

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError("period must be positive and finite")
        for name in ("a2", "a1", "a0"):
            object.__setattr__(self, name, _fn(getattr(self, name), self.period))

    @classmethod
    def from_exprs(cls, a2, a1, a0, period: float = TWO_PI,
                   params: Mapping[str, float] | None = None) -> "GeneralRiccati":
        return cls(period, *(PeriodicFn.from_expr(s, period, params) if isinstance(s, str)
                             else as_periodic(s, period) for s in (a2, a1, a0)))

    @classmethod
    def canonical(cls, gamma) -> "GeneralRiccati":
        gamma = as_periodic(gamma)
        T = gamma.period
        return cls(T, PeriodicFn.constant(1.0, T), PeriodicFn.constant(0.0, T), gamma)

    def f(self, t, u):
        return self.a2(t) * u * u + self.a1(t) * u + self.a0(t)


@dataclass(frozen=True, eq=False)
class ReductionRecord:
    gamma: PeriodicFn
    kind: str  # "nonvanishing" | "singular"
    A_fn: PeriodicFn | None = None
    a2_fn: PeriodicFn | None = None
    m_fn: PeriodicFn | None = None
    n_fn: PeriodicFn | None = None
    u0: float | None = None

    def forward(self, t, u):
        """Original variable ``u`` to canonical ``x``."""
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.kind == "nonvanishing":
            return self.a2_fn(t) * u + self.A_fn(t)
        w = u - self.u0
        bad = np.abs(w) <= CURVE_MARGIN * (1.0 + abs(self.u0))
        if np.any(bad):
            raise CurveCrossing(float(np.atleast_1d(t)[np.argmax(np.atleast_1d(bad))]))
        return self.m_fn(t) / w + self.n_fn(t)

    def backward(self, t, x):
        """Canonical ``x`` to the original variable ``u``."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.kind == "nonvanishing":
            return (x - self.A_fn(t)) / self.a2_fn(t)
        w = x - self.n_fn(t)
        bad = np.abs(w) <= CURVE_MARGIN * (1.0 + np.abs(x))
        if np.any(bad):
            raise CurveCrossing(float(np.atleast_1d(t)[np.argmax(np.atleast_1d(bad))]))
        return self.u0 + self.m_fn(t) / w


def _derivative(f: PeriodicFn) -> PeriodicFn:
    return f.derivative(PROJECTION_ORDER)


def _check_nonvanishing(f: PeriodicFn, grid: int, exc: type[_VanishingError]) -> None:
    """Raise ``exc`` if ``f`` is tiny somewhere on the grid or changes sign."""
    if grid < 8:
        raise ValueError("grid must have at least 8 points")
    t = f.grid(grid)
    v = f.samples(grid)
    scale = float(np.max(np.abs(v)))
    j = int(np.argmin(np.abs(v)))
    if scale == 0.0 or abs(v[j]) < VANISH_RTOL * scale:
        raise exc(t[j])
    flips = np.flatnonzero(np.sign(v) != np.sign(np.roll(v, -1)))
    if flips.size:
        i = int(flips[0])
        t_next = t[i] + f.period / grid
        v_next = v[(i + 1) % grid]
        raise exc(t[i] + (t_next - t[i]) * v[i] / (v[i] - v_next))


def reduce_nonvanishing(eq: GeneralRiccati, grid: int = DEFAULT_GRID) -> ReductionRecord:
    """Canonical form via ``y = a2 x + A``; requires ``a2`` of constant sign."""
    _check_nonvanishing(eq.a2, grid, A2Vanishes)
    A = (eq.a1 + _derivative(eq.a2) / eq.a2) * 0.5
    gamma = eq.a2 * eq.a0 - A * A + _derivative(A)
    return ReductionRecord(gamma=gamma, kind="nonvanishing", A_fn=A, a2_fn=eq.a2)


def singular_reduce(eq: GeneralRiccati, u0: float, grid: int = DEFAULT_GRID,
                    self_check: bool = True) -> ReductionRecord:
    """Canonical form via ``x = m/(u - u0) + n``; requires ``f(t, u0) != 0``."""
    u0 = float(u0)
    F = eq.a2 * (u0 * u0) + eq.a1 * u0 + eq.a0
    _check_nonvanishing(F, grid, FVanishes)
    G = eq.a2 * (2.0 * u0) + eq.a1
    m = -F
    n = (_derivative(F) - G * F) / (F * 2.0)
    gamma = eq.a2 * F + _derivative(n) - n * n
    rec = ReductionRecord(gamma=gamma, kind="singular", m_fn=m, n_fn=n, u0=u0)
    if self_check:
        res = singular_residual(eq, rec)
        if res > SELF_CHECK_TOL:
            raise SelfCheckFailed(f"canonical residual {res:.3e} along a trajectory")
    return rec


def singular_residual(eq: GeneralRiccati, rec: ReductionRecord,
                      starts=(0.5, -0.5, 2.0, -2.0, 0.1, -0.1)) -> float:
    """Max of ``|x' - x^2 - gamma|`` along integrated trajectories of ``eq``.

    Each start ``u0 + s`` is integrated over one period; escaping
    trajectories contribute their part with ``|u| <= 1e3`` and those coming
    within 1e-3 of ``u = u0`` are skipped. ``x'`` uses the chain rule with
    the exact ``u'``, so the residual measures the consistency of
    ``gamma, m, n`` rather than differentiation error.
    """
    from .oracle import GeneralField, integrate_batch

    fld = GeneralField(eq.a2, eq.a1, eq.a0)
    r = integrate_batch(fld, [rec.u0 + s for s in starts], 0.0, eq.period, record=True)
    dm, dn = _derivative(rec.m_fn), _derivative(rec.n_fn)
    worst, used = 0.0, 0
    for t, u in r.traj:
        keep = np.abs(u) <= 1e3
        t, u = t[keep], u[keep]
        w = u - rec.u0
        if t.size < 8 or np.min(np.abs(w)) <= 1e-3:
            continue
        used += 1
        m, n = rec.m_fn(t), rec.n_fn(t)
        x = m / w + n
        up = eq.f(t, u)
        xp = dm(t) / w - m * up / (w * w) + dn(t)
        res = np.abs(xp - x * x - rec.gamma(t)) / (1.0 + x * x)
        worst = max(worst, float(np.max(res)))
    if used == 0:
        raise SelfCheckFailed("no usable trajectory for the self-check")
    return worst


def map_back(rec: ReductionRecord, x_traj):
    """Pull a canonical trajectory ``(t, x)`` back to the original variable."""
    t, x = (np.asarray(a, dtype=float) for a in x_traj)
    return t, rec.backward(t, x)


def map_forward(rec: ReductionRecord, u_traj):
    """Push an original trajectory ``(t, u)`` to canonical coordinates."""
    t, u = (np.asarray(a, dtype=float) for a in u_traj)
    return t, rec.forward(t, u)


def gamma_text(rec: ReductionRecord) -> str | None:
    """Closed form of ``gamma`` when it is symbolic."""
    e = rec.gamma.to_expr()
    return None if e is None else ep.to_text(e)
