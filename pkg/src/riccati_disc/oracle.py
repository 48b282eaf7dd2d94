"""Poincare-map oracle for scalar periodic Riccati equations.

Integrates ``x' = a2(t) x^2 + a1(t) x + a0(t)`` (canonical case: ``a2 = 1``,
``a1 = 0``, ``a0 = gamma + mu``) with an embedded Dormand-Prince 5(4) pair,
many initial conditions at once, each with its own time and step size. The
displacement map ``x0 -> x(T; x0) - x0`` is sampled on a grid; sign changes are
refined by multisection and each located cycle is classified through
``h = int_0^T df/dx(t, phi(t)) dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exprparse import DomainError
from .functionals import Bracket, Classification
from .periodic import PeriodicFn, as_periodic, center

ESCAPE = 1e6
INTEGRATOR_TOL = 1e-10
PRECHECK_TOL = 1e-12
ROOT_CHECK_TOL = 1e-6

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class ScanInconclusive(RuntimeError):
    """No point of the scan range produced a finite displacement."""


# ---------------------------------------------------------------------------
# Vector fields

class QuadraticField:
    """``x' = a2(t) x^2 + a1(t) x + a0(t) + mu``; subclasses supply coefficients."""

    period: float
    canonical = False

    def coefficients(self, t: np.ndarray):
        raise NotImplementedError

    def bound(self) -> float:
        """Crude bound on cycle amplitudes from ``a2 x^2 + a1 x + a0 = 0``."""
        raise NotImplementedError


class CanonicalField(QuadraticField):
    canonical = True

    def __init__(self, gamma: PeriodicFn, mu: float = 0.0):
        self.gamma = gamma
        self.mu = float(mu)
        self.period = gamma.period
        self._g = gamma.raw()

    def coefficients(self, t):
        return 1.0, 0.0, self._g(t) + self.mu

    def bound(self) -> float:
        return math.sqrt(np.max(np.abs(self.gamma.samples(1024) + self.mu)))


class GeneralField(QuadraticField):
    def __init__(self, a2: PeriodicFn, a1: PeriodicFn, a0: PeriodicFn, mu: float = 0.0):
        self.a2, self.a1, self.a0 = a2, a1, a0
        self.mu = float(mu)
        self.period = a2.period
        self._f = (a2.raw(), a1.raw(), a0.raw())

    def coefficients(self, t):
        f2, f1, f0 = self._f
        return f2(t), f1(t), f0(t) + self.mu

    def bound(self) -> float:
        a2 = np.abs(self.a2.samples(1024))
        a1 = np.abs(self.a1.samples(1024))
        a0 = np.abs(self.a0.samples(1024) + self.mu)
        m = max(float(np.min(a2)), 1e-3 * max(1.0, float(np.max(a2))))
        return float(np.max((a1 + np.sqrt(a1 * a1 + 4 * a2 * a0)) / (2 * m)))


class ReversedField(QuadraticField):
    """``y(s) = x(-s)``: the time-reversed equation, which swaps stability."""

    def __init__(self, base: QuadraticField):
        self.base = base
        self.period = base.period

    def coefficients(self, t):
        a2, a1, a0 = self.base.coefficients(-np.asarray(t))
        return -a2, -a1, -a0

    def bound(self) -> float:
        return self.base.bound()


def make_field(eq, mu: float = 0.0) -> QuadraticField:
    """Field for a canonical ``gamma`` or a general equation with ``a2, a1, a0``."""
    if isinstance(eq, QuadraticField):
        if mu:
            raise ValueError("mu offset given for an already-built field")
        return eq
    if all(hasattr(eq, k) for k in ("a2", "a1", "a0")):
        return GeneralField(eq.a2, eq.a1, eq.a0, mu)
    return CanonicalField(as_periodic(eq), mu)


# ---------------------------------------------------------------------------
# Batched integrator

@dataclass
class BatchResult:
    x: np.ndarray          # state at t1 (nan if escaped)
    escape_sign: np.ndarray  # 0, +1 or -1
    t_escape: np.ndarray
    steps: np.ndarray
    est_error: np.ndarray
    quad: np.ndarray | None  # columns: int x, int x^2, int df/dx
    traj: list | None

    @property
    def displacement_like(self) -> np.ndarray:
        out = self.x.copy()
        out[self.escape_sign > 0] = np.inf
        out[self.escape_sign < 0] = -np.inf
        return out


def integrate_batch(fld: QuadraticField, x0, t0: float, t1: float,
                    tol: float = INTEGRATOR_TOL, quad: bool = False,
                    record: bool = False, escape: float = ESCAPE,
                    max_steps: int = 200_000, invert_at: float | None = None) -> BatchResult:
    """Integrate many initial conditions over ``[t0, t1]`` independently.

    Once ``|x|`` exceeds ``invert_at`` a trajectory continues in ``y = 1/x``,
    which obeys the regular equation ``y' = -(a2 + a1 y + a0 y^2)``; the
    approach to a pole then costs a handful of steps and escape is
    ``|y| < 1/escape`` (or ``y`` crossing zero). Inversion is disabled when
    quadratures or trajectories are requested.
    """
    x = np.array(x0, dtype=float).reshape(-1)
    m = x.size
    if not t1 > t0:
        raise ValueError("need t0 < t1")
    span = t1 - t0
    if invert_at is None:
        invert_at = max(1e3, 100.0 * (1.0 + fld.bound()))
    use_inv = not (quad or record) and invert_at < escape
    t = np.full(m, float(t0))
    done = np.zeros(m, dtype=bool)
    inv = np.zeros(m, dtype=bool)
    sign = np.zeros(m, dtype=np.int8)
    t_esc = np.full(m, np.nan)
    steps = np.zeros(m, dtype=np.int64)
    err_acc = np.zeros(m)
    Q = np.zeros((m, 3)) if quad else None
    traj = [[(float(t0), float(v))] for v in x] if record else None

    def rhs(tt, yy, iv):
        a2, a1, a0 = fld.coefficients(tt)
        f = a2 * yy * yy + a1 * yy + a0
        if iv is not None:
            f = np.where(iv, -(a2 + a1 * yy + a0 * yy * yy), f)
        return f, a2, a1

    with np.errstate(all="ignore"):
        k1 = np.broadcast_to(rhs(t, x, None)[0], x.shape).astype(float)
    h = np.minimum(span / 64, 0.1 * (1.0 + np.abs(x)) / (np.abs(k1) + 1e-12))
    h_floor = 1e-13 * (1.0 + abs(t0) + abs(t1))
    y_esc = 1.0 / escape

    def switch(idx):
        # enter inverted coordinates where |x| is large
        big = idx[np.abs(x[idx]) > invert_at]
        if big.size:
            x[big] = 1.0 / x[big]
            inv[big] = True
            with np.errstate(all="ignore"):
                k1[big] = rhs(t[big], x[big], np.ones(big.size, bool))[0]
        # leave them again where |x| has come back down
        back = idx[inv[idx] & (np.abs(x[idx]) > 2.0 / invert_at)]
        if back.size:
            x[back] = 1.0 / x[back]
            inv[back] = False
            with np.errstate(all="ignore"):
                k1[back] = rhs(t[back], x[back], None)[0]

    def mark_escape(idx, sgn, when):
        sign[idx] = sgn
        t_esc[idx] = when
        done[idx] = True

    if use_inv:
        switch(np.arange(m))

    for _ in range(max_steps):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        ta, xa, ha, k1a = t[act], x[act], h[act], k1[act]
        iva = inv[act] if use_inv and np.any(inv[act]) else None
        ha = np.minimum(ha, t1 - ta)
        K = [k1a]
        Y = [xa]
        G2 = []  # (a2, a1) at stages for the quadrature of df/dx
        with np.errstate(all="ignore"):
            a2, a1, a0 = fld.coefficients(ta)
            if not (np.all(np.isfinite(a0)) and np.all(np.isfinite(a2))
                    and np.all(np.isfinite(a1))):
                raise DomainError("coefficient not finite along the trajectory")
            G2.append((a2, a1))
            for s in range(1, 7):
                ys = xa + ha * sum(_A[s][j] * K[j] for j in range(s) if _A[s][j] != 0.0)
                ks, a2, a1 = rhs(ta + _C[s] * ha, ys, iva)
                K.append(np.broadcast_to(ks, xa.shape))
                Y.append(ys)
                G2.append((a2, a1))
            x5 = Y[6]
            err = ha * np.abs(sum(_E[s] * K[s] for s in range(7) if _E[s] != 0.0))
            big = np.maximum(np.abs(xa), np.abs(x5))
            scale = tol + tol * big if iva is None else np.where(iva, tol * (big + y_esc),
                                                                  tol + tol * big)
            r = err / scale
        r[~np.isfinite(r) | ~np.isfinite(x5)] = np.inf
        ok = r <= 1.0
        fac = np.clip(0.9 * np.maximum(r, 1e-10) ** -0.2, 0.2, 5.0)
        fac[~ok] = np.minimum(fac[~ok], 0.9)
        h_new = ha * fac

        idx_ok = act[ok]
        if idx_ok.size:
            hk = ha[ok]
            t_new = ta[ok] + hk
            t[idx_ok] = np.where(t1 - t_new <= h_floor, t1, t_new)
            x[idx_ok] = x5[ok]
            k1[idx_ok] = K[6][ok]
            steps[idx_ok] += 1
            err_acc[idx_ok] += err[ok]
            if quad:
                ix = np.zeros(ok.sum())
                ix2 = np.zeros(ok.sum())
                idf = np.zeros(ok.sum())
                for s in range(6):
                    if _B[s] == 0.0:
                        continue
                    ys = Y[s][ok]
                    a2s, a1s = G2[s]
                    a2s = a2s[ok] if np.ndim(a2s) else a2s
                    a1s = a1s[ok] if np.ndim(a1s) else a1s
                    ix += _B[s] * ys
                    ix2 += _B[s] * ys * ys
                    idf += _B[s] * (2.0 * a2s * ys + a1s)
                Q[idx_ok, 0] += hk * ix
                Q[idx_ok, 1] += hk * ix2
                Q[idx_ok, 2] += hk * idf
            if record:
                for i in idx_ok:
                    traj[i].append((t[i], x[i]))
            direct = idx_ok[~inv[idx_ok]]
            esc = direct[np.abs(x[direct]) > escape]
            if esc.size:
                mark_escape(esc, np.where(x[esc] > 0, 1, -1), t[esc])
            if iva is not None:
                okv = iva[ok]
                y_old = xa[ok][okv]
                iv_idx = idx_ok[okv]
                y_now = x[iv_idx]
                hit = (np.abs(y_now) < y_esc) | (y_now * y_old <= 0)
                if np.any(hit):
                    # y is close to linear near a pole: interpolate where |y| = 1/escape
                    yo, yn = y_old[hit], y_now[hit]
                    sg = np.where(yo > 0, 1, -1)
                    frac = np.clip((yo - sg * y_esc) / (yo - yn), 0.0, 1.0)
                    t_hit = ta[ok][okv][hit] + frac * hk[okv][hit]
                    mark_escape(iv_idx[hit], sg, t_hit)
            if use_inv:
                switch(idx_ok[~done[idx_ok]])
            done[idx_ok[t[idx_ok] >= t1]] = True
        h[act] = h_new
        stuck = act[~ok & (h_new < h_floor)]
        if stuck.size:
            # step-size underflow: blow-up approach
            s_x = np.where(x[stuck] >= 0, 1, -1)
            mark_escape(stuck, s_x, t[stuck])
    else:
        raise RuntimeError("integrator exceeded max_steps")

    x_out = np.where(inv, 1.0 / np.where(inv, x, 1.0), x)
    x_out[sign != 0] = np.nan
    trajs = None
    if record:
        trajs = [(np.array([p[0] for p in tr]), np.array([p[1] for p in tr])) for tr in traj]
    return BatchResult(x_out, sign, t_esc, steps, err_acc, Q, trajs)


# ---------------------------------------------------------------------------
# Scalar API

@dataclass(frozen=True)
class IntegrationResult:
    x_end: float | None
    escape_sign: int
    t_escape: float | None
    steps: int
    est_error: float

    @property
    def escaped(self) -> bool:
        return self.escape_sign != 0


def integrate(gamma, mu_offset: float, x0: float, t0: float, t1: float,
              tol: float = INTEGRATOR_TOL) -> IntegrationResult:
    """Integrate ``x' = x^2 + gamma(t) + mu_offset`` (or a general equation)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = integrate_batch(make_field(gamma, mu_offset), [x0], t0, t1, tol)
    if r.escape_sign[0]:
        return IntegrationResult(None, int(r.escape_sign[0]), float(r.t_escape[0]),
                                 int(r.steps[0]), float(r.est_error[0]))
    return IntegrationResult(float(r.x[0]), 0, None, int(r.steps[0]), float(r.est_error[0]))


def displacements(eq, x0s, mu_offset: float = 0.0, tol: float = INTEGRATOR_TOL) -> np.ndarray:
    """``x(T; x0) - x0`` for each ``x0``; ``+inf``/``-inf`` mark escapes."""
    fld = make_field(eq, mu_offset)
    x0s = np.asarray(x0s, dtype=float).reshape(-1)
    r = integrate_batch(fld, x0s, 0.0, fld.period, tol)
    return r.displacement_like - x0s


def displacement(eq, mu_offset: float, x0: float, tol: float = INTEGRATOR_TOL) -> float:
    return float(displacements(eq, [x0], mu_offset, tol)[0])


# ---------------------------------------------------------------------------
# Cycle location

@dataclass(frozen=True)
class ScanOptions:
    x_lo: float | None = None
    x_hi: float | None = None
    n_points: int = 400
    cycle_tol: float = 1e-10
    d_tol: float = 1e-6
    h_tol: float = 1e-6
    tol: float = INTEGRATOR_TOL
    sections: int = 16
    widen: bool = True


@dataclass(frozen=True, eq=False)
class CycleInfo:
    x0: float
    h: float
    stability: str  # attractive | repulsive | semistable
    mean: float
    mean_sq: float
    residual: float  # displacement at x0
    traj: tuple[np.ndarray, np.ndarray]


def default_range(fld: QuadraticField) -> tuple[float, float]:
    r = 1.0 + 2.0 * fld.bound() * (1.0 + fld.period)
    return -r, r


def _sign_changes(d: np.ndarray) -> list[int]:
    """Indices ``i`` with a root in ``[x_i, x_i+1]`` (non-nan neighbours)."""
    out = []
    for i in range(d.size - 1):
        a, b = d[i], d[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            out.append(i)
        elif (a < 0 < b) or (a > 0 > b):
            out.append(i)
    return out


def _mobius_fixed_point(xs, ds, lo: float, hi: float) -> float | None:
    """Fixed point in ``(lo, hi)`` of the Mobius map through three samples.

    The period map of a Riccati equation is a Mobius transformation
    ``P(x) = (a x + b) / (c x + e)``, so three exact samples determine it.
    """
    try:
        a, b, c, e = _mobius_fit(xs, ds)
    except np.linalg.LinAlgError:
        return None
    if abs(c) > 1e-300:
        roots = np.roots([c, e - a, -b])
    else:
        roots = np.array([b / (a - e)]) if a != e else np.array([])
    roots = [float(r.real) for r in np.atleast_1d(roots)
             if abs(r.imag) <= 1e-12 * (1 + abs(r.real)) and lo < r.real < hi]
    return roots[0] if len(roots) == 1 else None


def _probe_points(b, k):
    """Uniform multisection points plus a cluster around a root estimate."""
    lo, hi, dlo, dhi, sx, sd = b
    w = hi - lo
    pts = list(np.linspace(lo, hi, k + 2)[1:-1])
    c = None
    if sx is not None and sx.size >= 3:
        near = np.argsort(np.abs(sx - 0.5 * (lo + hi)))[:3]
        c = _mobius_fixed_point(sx[near], sd[near], lo, hi)
    if c is None and np.isfinite(dlo) and np.isfinite(dhi) and dhi != dlo:
        c = lo - dlo * w / (dhi - dlo)
    if c is not None:
        for eps in (1e-3, 1e-6, 1e-9):
            pts += [c - eps * w, c + eps * w]
    pts = np.array(pts)
    return np.unique(pts[(pts > lo) & (pts < hi)])


def _finite_samples(xs, ds):
    keep = np.isfinite(ds)
    return np.asarray(xs)[keep], np.asarray(ds)[keep]


def _refine_roots(fld, brackets, opts: ScanOptions) -> list[float]:
    """Bracketed refinement of all roots at once until width < cycle_tol.

    ``brackets`` holds ``(lo, hi, d_lo, d_hi, xs, ds)`` where ``xs, ds`` are
    nearby finite samples (or ``None``). Each round evaluates a uniform
    multisection of every live bracket plus points clustered around a
    Mobius-fit estimate of the root.
    """
    br = [list(b) for b in brackets]
    k = opts.sections
    while True:
        live = [i for i, b in enumerate(br) if b[1] - b[0] > 0.25 * opts.cycle_tol and b[2] != 0.0]
        if not live:
            break
        probes = [_probe_points(br[i], k) for i in live]
        d = displacements(fld, np.concatenate(probes), tol=opts.tol)
        pos = 0
        for pts, i in zip(probes, live):
            lo, hi, dlo, dhi = br[i][:4]
            xs = np.concatenate(([lo], pts, [hi]))
            ds = np.concatenate(([dlo], d[pos:pos + pts.size], [dhi]))
            pos += pts.size
            hit = np.flatnonzero(ds == 0.0)
            if hit.size:
                x = xs[hit[0]]
                br[i] = [x, x, 0.0, 0.0, None, None]
                continue
            s = np.flatnonzero(np.sign(ds[:-1]) != np.sign(ds[1:]))
            if s.size == 0:  # lost the sign change (nan / noise); stop here
                br[i] = [lo, lo, 0.0, 0.0, None, None]
                continue
            m = s[0]
            br[i] = [xs[m], xs[m + 1], ds[m], ds[m + 1], *_finite_samples(xs, ds)]
    return [0.5 * (b[0] + b[1]) if b[2] != 0.0 else b[0] for b in br]


def _mobius_fit(xs, ds):
    """Coefficients ``(a, b, c, e)`` of the Mobius map through three samples."""
    xs = np.asarray(xs, dtype=float)
    ps = xs + np.asarray(ds, dtype=float)
    M = np.column_stack((xs, np.ones(xs.size), -xs * ps, -ps))
    return np.linalg.svd(M)[2][-1]


def _mobius_stationary(xs, ds, lo: float, hi: float) -> list[float]:
    """Points in ``(lo, hi)`` where the fitted map has slope one."""
    try:
        a, b, c, e = _mobius_fit(xs, ds)
    except np.linalg.LinAlgError:
        return []
    det = a * e - b * c
    if det <= 0 or abs(c) < 1e-300:
        return []
    r = math.sqrt(det)
    return [x for x in ((r - e) / c, (-r - e) / c) if lo < x < hi]


def _minimize_displacement(fld, lo: float, hi: float, opts: ScanOptions,
                           xtol: float = 1e-6, sign: float = 1.0) -> tuple[float, float]:
    """Minimize ``sign * displacement`` on ``[lo, hi]``; returns ``(x, sign * d)``.

    Multisection, with the stationary point of a Mobius fit through the
    best samples added to every round.
    """
    k = opts.sections
    best_x, best_d = lo, math.inf
    extra: list[float] = []
    while True:
        xs = np.unique(np.concatenate((np.linspace(lo, hi, k + 1), extra)))
        d = sign * displacements(fld, xs, tol=opts.tol)
        d = np.where(np.isnan(d), np.inf, d)
        j = int(np.argmin(d))
        if d[j] < best_d:
            best_x, best_d = float(xs[j]), float(d[j])
        lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, xs.size - 1)]
        if hi - lo < 2 * xtol:
            return best_x, best_d
        extra = []
        fin = np.isfinite(d)
        if np.count_nonzero(fin) >= 3:
            fx, fd = xs[fin], d[fin]
            near = np.argsort(np.abs(fx - best_x))[:3]
            for c in _mobius_stationary(fx[near], sign * fd[near], lo, hi):
                w = hi - lo
                extra += [c, c - 1e-4 * w, c + 1e-4 * w]


def _stability(h: float, h_tol: float) -> str:
    if h < -h_tol:
        return "attractive"
    if h > h_tol:
        return "repulsive"
    return "semistable"


def cycle_info(eq, x0s: Sequence[float], mu_offset: float = 0.0,
               opts: ScanOptions | None = None) -> list[CycleInfo]:
    """Quadratures along located cycles.

    Repulsive cycles amplify integration error by ``exp(h)``, so they are
    followed in reversed time where they attract; ``residual`` is then the
    displacement of the reversed map.
    """
    opts = opts or ScanOptions()
    fld = make_field(eq, mu_offset)
    x0s = np.asarray(x0s, dtype=float)
    if x0s.size == 0:
        return []
    T = fld.period
    fw = integrate_batch(fld, x0s, 0.0, T, opts.tol, quad=True, record=True)
    redo = [i for i in range(x0s.size) if fw.escape_sign[i] or fw.quad[i, 2] > 0]
    bw = None
    if redo:
        bw = integrate_batch(ReversedField(fld), x0s[redo], 0.0, T, opts.tol,
                             quad=True, record=True)
    out = []
    for i, x0 in enumerate(x0s):
        if i in redo:
            k = redo.index(i)
            q = bw.quad[k]
            h, mean, mean_sq = -float(q[2]), float(q[0] / T), float(q[1] / T)
            res = float(bw.x[k] - x0) if not bw.escape_sign[k] else math.inf
            s_, y_ = bw.traj[k]
            traj = ((T - s_)[::-1], y_[::-1])  # t = -s, shifted by one period
        else:
            h, mean, mean_sq = float(fw.quad[i, 2]), float(fw.quad[i, 0] / T), float(fw.quad[i, 1] / T)
            res = float(fw.x[i] - x0)
            traj = fw.traj[i]
        out.append(CycleInfo(x0=float(x0), h=h, stability=_stability(h, opts.h_tol),
                             mean=mean, mean_sq=mean_sq, residual=res, traj=traj))
    return out


def _canonical_precheck(fld: CanonicalField):
    gbar = fld.gamma.mean() + fld.mu
    scale = 1.0 + fld.gamma.sup_norm()
    if gbar > PRECHECK_TOL * scale:
        return Classification.NO_CYCLES
    if abs(gbar) <= PRECHECK_TOL * scale:
        if center(fld.gamma).sup_norm() > PRECHECK_TOL * scale:
            return Classification.NO_CYCLES
        return Classification.ONE_DOUBLE
    return None


def count_cycles(eq, mu_offset: float = 0.0, scan: ScanOptions | None = None
                 ) -> tuple[Classification, list[CycleInfo]]:
    """Locate and classify the periodic solutions by scanning the displacement map."""
    opts = scan or ScanOptions()
    fld = make_field(eq, mu_offset)
    if fld.canonical:
        pre = _canonical_precheck(fld)
        if pre is Classification.NO_CYCLES:
            return pre, []
        if pre is Classification.ONE_DOUBLE:
            # gamma + mu == 0 identically: x == 0 is the double cycle
            return pre, cycle_info(fld, [0.0], opts=opts)

    lo, hi = default_range(fld)
    if opts.x_lo is not None:
        lo = opts.x_lo
    if opts.x_hi is not None:
        hi = opts.x_hi
    if not hi > lo:
        raise ValueError("scan range must satisfy x_hi > x_lo")

    for attempt in range(2):
        xs = np.linspace(lo, hi, opts.n_points)
        d = displacements(fld, xs, tol=opts.tol)
        if not np.any(np.isfinite(d)):
            # an attracting or semi-stable cycle would keep a half-line of
            # starts bounded, so one-directional escape everywhere means none
            if np.all(d > 0) or np.all(d < 0):
                return Classification.NO_CYCLES, []
            raise ScanInconclusive(f"every displacement on [{lo}, {hi}] escaped")
        changes = _sign_changes(d)
        at_edge = any(i == 0 or i + 1 == xs.size - 1 for i in changes)
        if at_edge and opts.widen and attempt == 0:
            w = hi - lo
            lo, hi = lo - w / 2, hi + w / 2
            continue
        break

    fx, fd = _finite_samples(xs, d)
    brackets = [(xs[i], xs[i + 1], d[i], d[i + 1], fx, fd) for i in changes]
    roots = _refine_roots(fld, brackets, opts)

    if not roots:
        # one-signed displacement: look for a near-tangency of the extremum
        fin = np.isfinite(d)
        sg = 1.0 if np.sum(d[fin] > 0) >= np.sum(d[fin] < 0) else -1.0
        sd = np.where(fin, sg * d, np.inf)
        j = int(np.argmin(sd))
        ja, jb = max(j - 1, 0), min(j + 1, xs.size - 1)
        xm, dm = _minimize_displacement(fld, xs[ja], xs[jb], opts, sign=sg)
        if dm < -opts.d_tol:
            roots = _refine_roots(fld, [(xs[ja], xm, d[ja], sg * dm, None, None),
                                        (xm, xs[jb], sg * dm, d[jb], None, None)], opts)
        elif dm <= opts.d_tol:
            return Classification.ONE_DOUBLE, cycle_info(fld, [xm], opts=opts)
        else:
            return Classification.NO_CYCLES, []

    roots = sorted(roots)
    if len(roots) > 0:
        # sign changes next to an escape can be poles of the period map rather
        # than cycles; a genuine cycle closes up in one time direction
        infos = cycle_info(fld, roots, opts=opts)
        keep = [abs(c.residual) <= ROOT_CHECK_TOL for c in infos]
        if not all(keep):
            roots = [r for r, k in zip(roots, keep) if k]
            if not roots:
                return Classification.NO_CYCLES, []
    if len(roots) == 2:
        inside = (xs > roots[0]) & (xs < roots[1]) & np.isfinite(d)
        if np.any(np.abs(d[inside]) > opts.d_tol):
            return Classification.TWO_HYPERBOLIC, cycle_info(fld, roots, opts=opts)
        # tiny interior: is the extremum between the roots a real excursion?
        mid = d[inside]
        sg = -1.0 if mid.size and np.sum(mid > 0) > np.sum(mid < 0) else 1.0
        xm, dm = _minimize_displacement(fld, roots[0], roots[1], opts, sign=sg)
        if dm >= -opts.d_tol:
            return Classification.ONE_DOUBLE, cycle_info(fld, [xm], opts=opts)
        return Classification.TWO_HYPERBOLIC, cycle_info(fld, roots, opts=opts)
    cycles = cycle_info(fld, roots, opts=opts)
    if len(roots) == 1:
        if cycles[0].stability == "semistable":
            return Classification.ONE_DOUBLE, cycles
        return Classification.ONE_HYPERBOLIC, cycles
    return Classification.UNDETERMINED, cycles


# ---------------------------------------------------------------------------
# Saddle-node bracketing in mu

@dataclass(frozen=True)
class BifurcationRow:
    mu: float
    classification: Classification
    x0s: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class BifurcationResult:
    rows: list[BifurcationRow]
    monotone: bool
    bracket: Bracket
    evaluations: int = 0


def min_displacement(gamma_hat, mu: float, lo: float, hi: float,
                     opts: ScanOptions | None = None, xtol: float = 1e-5) -> tuple[float, float]:
    """Minimum of the displacement over ``[lo, hi]`` for shift ``mu``.

    Negative iff the shifted equation has two cycles around the minimizer.
    """
    opts = opts or ScanOptions()
    return _minimize_displacement(make_field(gamma_hat, mu), lo, hi, opts, xtol)


def bifurcation_scan(gamma_hat, mu_grid: Sequence[float] | None = None,
                     scan: ScanOptions | None = None, width: float = 1e-6,
                     max_iter: int = 60) -> BifurcationResult:
    """Bracket the saddle-node parameter with the Poincare map alone.

    Each grid value of ``mu`` is classified with :func:`count_cycles`; the
    last two-cycle and first no-cycle values are then narrowed by a bracketing
    root search on ``mu -> min displacement`` until the bracket is at most
    ``width`` wide.
    """
    opts = scan or ScanOptions()
    gamma_hat = as_periodic(gamma_hat)
    if mu_grid is None:
        mu_minus = -float(np.max(gamma_hat.samples(4096)))
        mu_grid = np.linspace(mu_minus - 0.1, 0.0, 9)
    rows = []
    for mu in sorted(float(m) for m in mu_grid):
        try:
            cls, cyc = count_cycles(gamma_hat, mu, opts)
        except ScanInconclusive:
            # every start in the band blows up within one period: no cycle there
            cls, cyc = Classification.NO_CYCLES, []
        rows.append(BifurcationRow(mu, cls, tuple(c.x0 for c in cyc)))

    two = [r for r in rows if r.classification is Classification.TWO_HYPERBOLIC]
    monotone = all(b.x0s[0] >= a.x0s[0] - 1e-9 and b.x0s[1] <= a.x0s[1] + 1e-9
                   for a, b in zip(two, two[1:]))
    if not two:
        raise ScanInconclusive("no grid value of mu with two cycles")
    lo_row = two[-1]
    after = [r for r in rows if r.mu > lo_row.mu]
    if not after:
        raise ScanInconclusive("no grid value of mu above the two-cycle region")
    hi_mu = after[0].mu

    # the minimizer of the displacement lies between the two cycles
    xa, xb = lo_row.x0s
    full = (xa - 0.05 * (xb - xa) - 1e-3, xb + 0.05 * (xb - xa) + 1e-3)
    state = {"xm": None}
    evals = 0

    def g(mu):
        nonlocal evals
        evals += 1
        xm = state["xm"]
        if xm is not None:
            r = 0.02 * (full[1] - full[0]) + 1e-3
            lo, hi = max(full[0], xm - r), min(full[1], xm + r)
            x, dm = min_displacement(gamma_hat, mu, lo, hi, opts)
            if lo + 1e-9 < x < hi - 1e-9 or not (full[0] < lo or hi < full[1]):
                state["xm"] = x
                return dm
        x, dm = min_displacement(gamma_hat, mu, *full, opts)
        state["xm"] = x
        return dm

    a, b = lo_row.mu, hi_mu
    fa, fb = g(a), g(b)
    if not (fa < 0 < fb):
        raise ScanInconclusive(f"min displacement does not change sign: {fa:.3e}, {fb:.3e}")
    half = 0.45 * width
    last = 0  # side updated in the previous iteration: -1 for a, +1 for b
    while b - a > width and evals < max_iter:
        # false position probed on both sides of the estimate (Illinois weighting)
        if not (math.isfinite(fa) and math.isfinite(fb)):
            # everything escaped at one end: plain bisection
            c = 0.5 * (a + b)
            fc = g(c)
            if fc < 0:
                a, fa = c, fc
            else:
                b, fb = c, fc
            last = 0
            continue
        c = (a * fb - b * fa) / (fb - fa)
        lo_c = min(max(c - half, a + 0.1 * half), b - 2.1 * half)
        hi_c = lo_c + 2 * half
        f_lo, f_hi = g(lo_c), g(hi_c)
        side = 0
        if f_hi < 0:
            a, fa, side = hi_c, f_hi, -1
        elif f_lo < 0:
            a, fa, b, fb = lo_c, f_lo, hi_c, f_hi
        else:
            b, fb, side = lo_c, f_lo, 1
        if side and side == last:
            if side < 0:
                fb *= 0.5
            else:
                fa *= 0.5
        last = side
    return BifurcationResult(rows, monotone, Bracket(a, b), evals)
