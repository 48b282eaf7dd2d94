"""Harmonic balance with the shift ``mu`` as an extra unknown.

For zero-mean ``alpha`` and truncation order ``n`` we look for a zero-mean
trig polynomial ``x_n`` of order ``n`` and a scalar ``mu`` such that the
Fourier modes ``0..n`` of

    x_n' - x_n^2 - alpha_n - mu

vanish (``2n+1`` equations, ``2n+1`` unknowns). The constant mode forces
``mu = -mean(x_n^2)``. The resulting ``p_n`` are admissible in both bounding
functionals, so every converged order yields a valid bracket of ``mu_star``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import Bracket, mu_bracket
from .periodic import (DEFAULT_SAMPLES, PeriodicFn, TrigPoly, as_periodic, fourier_truncate,
                       trig_diff, trig_mul)

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    def __init__(self, order: int, residual: float, iterations: int):
        super().__init__(
            f"harmonic balance Newton did not converge at order {order} "
            f"(residual {residual:.3e} after {iterations} iterations)")
        self.order = order
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class HBOptions:
    newton_tol: float = 1e-12
    max_iters: int = 50
    min_step: float = 2.0 ** -16
    fd_jacobian: bool = False
    fd_step: float = 1e-7

    def __post_init__(self):
        if self.newton_tol <= 0 or self.max_iters <= 0 or not (0 < self.min_step <= 1):
            raise ValueError("HB tolerances must be positive")


@dataclass(frozen=True, eq=False)
class HBSolution:
    order: int
    mu_n: float
    p_n: TrigPoly
    residual_sup: float
    newton_iters: int
    galerkin_norm: float = 0.0

    @property
    def lam(self) -> np.ndarray:
        """Coefficient vector ``(a_1..a_n, b_1..b_n)``."""
        return np.concatenate((self.p_n.a, self.p_n.b))


@dataclass(frozen=True, eq=False)
class HBStep:
    """One entry of :func:`hb_sequence`; ``solution is None`` marks a gap."""
    order: int
    solution: HBSolution | None
    bracket: Bracket | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.solution is not None


def _poly(lam: np.ndarray, period: float) -> TrigPoly:
    n = lam.size // 2
    return TrigPoly(period, 0.0, lam[:n], lam[n:])


def galerkin_residual(lam, mu: float, alpha_n: TrigPoly) -> np.ndarray:
    """Modes ``[1, cos 1..n, sin 1..n]`` of ``x' - x^2 - alpha_n - mu``."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size % 2:
        raise ValueError("coefficient vector must have even length 2n")
    n = lam.size // 2
    if alpha_n.order > n:
        raise ValueError(f"alpha_n has order {alpha_n.order} > n = {n}")
    x = _poly(lam, alpha_n.period)
    r = trig_diff(x) - trig_mul(x, x) - alpha_n - mu
    return r.padded(n).to_vector()


def galerkin_jacobian(lam, alpha_n: TrigPoly) -> np.ndarray:
    """Analytic Jacobian of :func:`galerkin_residual` w.r.t. ``(lam, mu)``.

    Column for a basis direction ``e`` is the projection of ``e' - 2 x e``;
    the ``mu`` column is ``-1`` on the constant mode.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size // 2
    period = alpha_n.period
    x = _poly(lam, period)
    J = np.zeros((2 * n + 1, 2 * n + 1))
    eye = np.eye(2 * n)
    for j in range(2 * n):
        e = _poly(eye[j], period)
        col = trig_diff(e) - 2.0 * trig_mul(x, e)
        J[:, j] = col.padded(n).to_vector()
    J[0, 2 * n] = -1.0
    return J


def _fd_jacobian(lam, mu, alpha_n, step) -> np.ndarray:
    z = np.append(lam, mu)
    n2 = lam.size
    J = np.zeros((n2 + 1, n2 + 1))
    for j in range(n2 + 1):
        zp, zm = z.copy(), z.copy()
        zp[j] += step
        zm[j] -= step
        J[:, j] = (galerkin_residual(zp[:n2], zp[n2], alpha_n)
                   - galerkin_residual(zm[:n2], zm[n2], alpha_n)) / (2 * step)
    return J


def _initial_guess(alpha_n: TrigPoly, init: HBSolution | None) -> tuple[np.ndarray, float]:
    n = alpha_n.order
    if init is not None:
        p = init.p_n.padded(n)
    else:
        # linear proxy x' = alpha_n, zero-mean antiderivative
        p = alpha_n.integral_from_zero()
        p = TrigPoly(p.period, 0.0, p.a, p.b)
    mu = -trig_mul(p, p).c0
    return np.concatenate((p.a, p.b)), mu


def full_residual_sup(p: TrigPoly, mu: float, alpha: PeriodicFn,
                      n_samples: int = DEFAULT_SAMPLES) -> float:
    """``sup_t |p' - p^2 - alpha - mu|`` with the untruncated ``alpha``."""
    t = np.arange(n_samples) * p.period / n_samples
    pv = p(t)
    return float(np.max(np.abs(trig_diff(p)(t) - pv * pv - alpha(t) - mu)))


def hb_solve(alpha, n: int, init: HBSolution | None = None,
             opts: HBOptions | None = None, alpha_n: TrigPoly | None = None) -> HBSolution:
    """Solve the order-``n`` Galerkin system by damped Newton.

    ``init`` (a lower-order solution) is zero-padded; otherwise the start is
    the zero-mean antiderivative of ``alpha_n``. Raises
    :class:`NonConvergence` when ``max_iters`` is exhausted or the line search
    stalls.
    """
    opts = opts or HBOptions()
    if n < 1:
        raise ValueError("order must be at least 1")
    alpha = as_periodic(alpha)
    if alpha_n is None:
        alpha_n = fourier_truncate(alpha, n)
    scale = 1.0 + alpha_n.coef_norm()
    if abs(alpha_n.c0) > 1e-9 * scale:
        raise ValueError(f"alpha must have zero average (mean {alpha_n.c0:.3e})")
    alpha_n = TrigPoly(alpha_n.period, 0.0, alpha_n.a, alpha_n.b).padded(n)

    lam, mu = _initial_guess(alpha_n, init)
    r = galerkin_residual(lam, mu, alpha_n)
    norm = float(np.max(np.abs(r)))
    it = 0
    while norm >= opts.newton_tol:
        if it >= opts.max_iters:
            raise NonConvergence(n, norm, it)
        it += 1
        J = (_fd_jacobian(lam, mu, alpha_n, opts.fd_step) if opts.fd_jacobian
             else galerkin_jacobian(lam, alpha_n))
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(J, -r, rcond=None)[0]
        step = 1.0
        while True:
            lam_new = lam + step * delta[:-1]
            mu_new = mu + step * delta[-1]
            r_new = galerkin_residual(lam_new, mu_new, alpha_n)
            norm_new = float(np.max(np.abs(r_new)))
            if norm_new < norm or norm_new < opts.newton_tol:
                break
            step *= 0.5
            if step < opts.min_step:
                # rounding floor: accept if already at machine-level residual
                if norm < 1e3 * opts.newton_tol:
                    norm_new = norm
                    lam_new, mu_new, r_new = lam, mu, r
                    break
                raise NonConvergence(n, norm, it)
        if lam_new is lam:
            break
        lam, mu, r, norm = lam_new, mu_new, r_new, norm_new

    p = _poly(lam, alpha_n.period)
    # the constant-mode equation gives mu exactly as -mean(p^2)
    return HBSolution(order=n, mu_n=float(mu), p_n=p,
                      residual_sup=full_residual_sup(p, mu, alpha),
                      newton_iters=it, galerkin_norm=norm)


def hb_sequence(alpha, n_max: int, opts: HBOptions | None = None,
                brackets: bool = True) -> list[HBStep]:
    """Orders ``1..n_max`` with warm starts; failed orders are recorded as gaps."""
    alpha = as_periodic(alpha)
    opts = opts or HBOptions()
    alpha_full = fourier_truncate(alpha, n_max)
    steps: list[HBStep] = []
    prev: HBSolution | None = None
    for n in range(1, n_max + 1):
        try:
            sol = hb_solve(alpha, n, init=prev, opts=opts, alpha_n=alpha_full.padded(n))
        except NonConvergence as exc:
            log.warning("%s", exc)
            steps.append(HBStep(n, None, None, str(exc)))
            continue
        bracket = mu_bracket(alpha, sol.p_n) if brackets else None
        steps.append(HBStep(n, sol, bracket))
        prev = sol
    return steps


def best_bracket(steps: list[HBStep]) -> Bracket | None:
    """Intersection of all brackets in ``steps`` (each is a valid enclosure)."""
    out = None
    for s in steps:
        if s.bracket is not None:
            out = s.bracket if out is None else out.intersect(s.bracket)
    return out
