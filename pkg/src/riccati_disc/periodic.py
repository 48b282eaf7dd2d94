"""T-periodic real functions: truncated Fourier series and evaluable wrappers.

A :class:`TrigPoly` stores ``c0 + sum_k a_k cos(k w t) + b_k sin(k w t)`` with
``w = 2 pi / period``. Products, derivatives and antiderivatives are exact
coefficient operations. A :class:`PeriodicFn` wraps anything that can be
sampled (parsed expression, trig polynomial, arbitrary callable) and keeps the
symbolic body around when there is one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import exprparse as ep
from .exprparse import DomainError

TWO_PI = 2.0 * math.pi

DEFAULT_SAMPLES = 2048
QUAD_RTOL = 1e-10
QUAD_MAX_SAMPLES = 1 << 18
PERIODICITY_PROBES = 64


# ---------------------------------------------------------------------------
# TrigPoly

@dataclass(frozen=True, eq=False)
class TrigPoly:
    period: float
    c0: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        if a.shape != b.shape:
            raise ValueError(f"cosine/sine coefficient lengths differ: {a.size} vs {b.size}")
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive and finite, got {self.period}")
        if not (math.isfinite(self.c0) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("trig polynomial coefficients must be finite")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "period", float(self.period))

    # construction -----------------------------------------------------------
    @classmethod
    def zero(cls, order: int = 0, period: float = TWO_PI) -> "TrigPoly":
        return cls(period, 0.0, np.zeros(order), np.zeros(order))

    @classmethod
    def constant(cls, c: float, period: float = TWO_PI) -> "TrigPoly":
        return cls(period, c, [], [])

    @classmethod
    def from_terms(cls, period: float = TWO_PI, c0: float = 0.0,
                   cos: dict[int, float] | None = None,
                   sin: dict[int, float] | None = None) -> "TrigPoly":
        """Build from sparse ``{k: coefficient}`` maps."""
        cos, sin = cos or {}, sin or {}
        n = max([0, *cos, *sin])
        a, b = np.zeros(n), np.zeros(n)
        for k, v in cos.items():
            a[k - 1] = v
        for k, v in sin.items():
            b[k - 1] = v
        return cls(period, c0, a, b)

    @classmethod
    def from_vector(cls, v, period: float = TWO_PI) -> "TrigPoly":
        """Inverse of :meth:`to_vector` (``[c0, a_1..a_n, b_1..b_n]``)."""
        v = np.asarray(v, dtype=float)
        n = (v.size - 1) // 2
        return cls(period, v[0], v[1:n + 1], v[n + 1:])

    @classmethod
    def _from_complex(cls, F: np.ndarray, period: float) -> "TrigPoly":
        n = (F.size - 1) // 2
        pos = F[n + 1:]
        return cls(period, F[n].real, 2.0 * pos.real, -2.0 * pos.imag)

    # properties -------------------------------------------------------------
    @property
    def order(self) -> int:
        return self.a.size

    @property
    def omega(self) -> float:
        return TWO_PI / self.period

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.c0], self.a, self.b))

    def _complex(self) -> np.ndarray:
        # F_k for k = -n..n with F_k = (a_k - i b_k)/2 for k > 0
        pos = 0.5 * (self.a - 1j * self.b)
        return np.concatenate((np.conj(pos[::-1]), [self.c0 + 0j], pos))

    # evaluation -------------------------------------------------------------
    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.order == 0:
            out = np.full(t_arr.shape, self.c0)
        else:
            k = np.arange(1, self.order + 1)
            phase = np.multiply.outer(t_arr, k * self.omega)
            out = self.c0 + np.cos(phase) @ self.a + np.sin(phase) @ self.b
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return self.c0

    def sup_norm(self, n_samples: int = 4096) -> float:
        t = np.arange(n_samples) * self.period / n_samples
        return float(np.max(np.abs(self(t))))

    def coef_norm(self) -> float:
        return float(np.max(np.abs(self.to_vector())))

    # algebra ----------------------------------------------------------------
    def _check_period(self, other: "TrigPoly") -> None:
        if not math.isclose(self.period, other.period, rel_tol=1e-14):
            raise ValueError(f"period mismatch: {self.period} vs {other.period}")

    def padded(self, order: int) -> "TrigPoly":
        """Zero-pad (or truncate) to exactly ``order`` harmonics."""
        a = np.zeros(order)
        b = np.zeros(order)
        m = min(order, self.order)
        a[:m] = self.a[:m]
        b[:m] = self.b[:m]
        return TrigPoly(self.period, self.c0, a, b)

    def truncated(self, order: int) -> "TrigPoly":
        return self.padded(min(order, self.order)) if order < self.order else self

    def __add__(self, other):
        if isinstance(other, TrigPoly):
            self._check_period(other)
            n = max(self.order, other.order)
            p, q = self.padded(n), other.padded(n)
            return TrigPoly(self.period, p.c0 + q.c0, p.a + q.a, p.b + q.b)
        if np.isscalar(other):
            return TrigPoly(self.period, self.c0 + float(other), self.a, self.b)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(self.period, -self.c0, -self.a, -self.b)

    def __sub__(self, other):
        if isinstance(other, TrigPoly) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            return trig_mul(self, other)
        if np.isscalar(other):
            s = float(other)
            return TrigPoly(self.period, s * self.c0, s * self.a, s * self.b)
        return NotImplemented

    __rmul__ = __mul__

    def derivative(self) -> "TrigPoly":
        return trig_diff(self)

    def integral_from_zero(self) -> "TrigPoly":
        """``t -> int_0^t p(s) ds`` for a zero-mean polynomial (exact)."""
        if self.c0 != 0.0:
            raise ValueError("antiderivative is not periodic: mean is nonzero")
        kw = np.arange(1, self.order + 1) * self.omega
        return TrigPoly(self.period, float(np.sum(self.b / kw)), -self.b / kw, self.a / kw)

    def shifted(self, s: float) -> "TrigPoly":
        """``t -> p(t + s)``."""
        kw = np.arange(1, self.order + 1) * self.omega * s
        c, sn = np.cos(kw), np.sin(kw)
        return TrigPoly(self.period, self.c0, self.a * c + self.b * sn, self.b * c - self.a * sn)

    def to_expr(self) -> ep.Expr:
        """Closed-form expression (``t`` in the same time units)."""
        e = ep.num(self.c0)
        for k in range(1, self.order + 1):
            kw = k * self.omega
            arg = ep.T if kw == 1.0 else ep.mul(ep.num(kw), ep.T)
            if self.a[k - 1] != 0.0:
                e = ep.add(e, ep.mul(ep.num(self.a[k - 1]), ep.call("cos", arg)))
            if self.b[k - 1] != 0.0:
                e = ep.add(e, ep.mul(ep.num(self.b[k - 1]), ep.call("sin", arg)))
        return e

    def __repr__(self) -> str:
        terms = [f"{self.c0:.6g}"]
        for k in range(1, self.order + 1):
            if self.a[k - 1]:
                terms.append(f"{self.a[k - 1]:+.6g}cos({k}wt)")
            if self.b[k - 1]:
                terms.append(f"{self.b[k - 1]:+.6g}sin({k}wt)")
        return f"TrigPoly(T={self.period:.6g}: {' '.join(terms)})"


def trig_mul(p: TrigPoly, q: TrigPoly) -> TrigPoly:
    """Exact product; the result has order ``p.order + q.order``."""
    p._check_period(q)
    F = np.convolve(p._complex(), q._complex())
    return TrigPoly._from_complex(F, p.period)


def trig_diff(p: TrigPoly) -> TrigPoly:
    kw = np.arange(1, p.order + 1) * p.omega
    return TrigPoly(p.period, 0.0, p.b * kw, -p.a * kw)


# ---------------------------------------------------------------------------
# PeriodicFn

class PeriodicFn:
    """Evaluable T-periodic function.

    ``body`` is an :class:`~riccati_disc.exprparse.Expr` (parameters already
    bound), a :class:`TrigPoly`, or a plain vectorized callable. Evaluation
    raises :class:`DomainError` on poles and non-finite values.
    """

    __slots__ = ("period", "body", "label", "_func", "_cache")

    def __init__(self, body, period: float = TWO_PI, label: str | None = None):
        if not (period > 0 and math.isfinite(period)):
            raise ValueError(f"period must be positive and finite, got {period}")
        if isinstance(body, TrigPoly):
            if not math.isclose(body.period, period, rel_tol=1e-14):
                raise ValueError("trig polynomial period differs from function period")
            func = body
        elif isinstance(body, ep.Expr):
            missing = ep.free_params(body)
            if missing:
                raise ep.UnboundParameter(sorted(missing)[0])
            func = ep.compile_expr(body)
        elif callable(body):
            func = body
        else:
            raise TypeError(f"unsupported periodic function body: {type(body).__name__}")
        self.period = float(period)
        self.body = body
        self.label = label
        self._func = func
        self._cache: dict = {}

    # construction -----------------------------------------------------------
    @classmethod
    def from_expr(cls, src, period: float = TWO_PI, params=None, label=None) -> "PeriodicFn":
        e = ep.parse(src) if isinstance(src, (str, bytes)) else src
        e = ep.substitute(e, params or {})
        return cls(e, period, label=label if label is not None else
                   (src if isinstance(src, str) else None))

    @classmethod
    def constant(cls, c: float, period: float = TWO_PI) -> "PeriodicFn":
        return cls(TrigPoly.constant(c, period), period)

    @classmethod
    def from_samples(cls, values, period: float = TWO_PI) -> "PeriodicFn":
        """Trigonometric interpolant through ``values`` at ``j*T/N``."""
        return cls(interpolate_samples(values, period), period)

    # evaluation -------------------------------------------------------------
    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = self._func(t_arr if t_arr.ndim else float(t_arr))
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise DomainError("non-finite value")
        if out.ndim == 0 and t_arr.ndim:
            out = np.full(t_arr.shape, float(out))
        return float(out) if out.ndim == 0 else out

    def raw(self):
        """Unchecked array evaluator for hot loops (may return non-finite values)."""
        if "raw" not in self._cache:
            if isinstance(self.body, ep.Expr):
                self._cache["raw"] = ep.compile_raw(self.body)
            else:
                self._cache["raw"] = self._func
        return self._cache["raw"]

    @property
    def is_trig(self) -> bool:
        return isinstance(self.body, TrigPoly)

    @property
    def is_expr(self) -> bool:
        return isinstance(self.body, ep.Expr)

    def grid(self, n: int) -> np.ndarray:
        return np.arange(n) * self.period / n

    def samples(self, n: int = DEFAULT_SAMPLES) -> np.ndarray:
        key = ("samples", n)
        if key not in self._cache:
            v = self(self.grid(n))
            v.flags.writeable = False
            self._cache[key] = v
        return self._cache[key]

    def mean(self) -> float:
        if "mean" not in self._cache:
            self._cache["mean"] = average(self)
        return self._cache["mean"]

    def sup_norm(self, n_samples: int = 4096) -> float:
        return float(np.max(np.abs(self.samples(n_samples))))

    def check_periodic(self, rtol: float = 1e-9) -> bool:
        t = self.grid(PERIODICITY_PROBES)
        v0, v1 = self(t), self(t + self.period)
        return bool(np.max(np.abs(v0 - v1)) <= rtol * (1.0 + np.max(np.abs(v0))))

    # transformations --------------------------------------------------------
    def to_expr(self) -> ep.Expr | None:
        if self.is_expr:
            return self.body
        if self.is_trig:
            return self.body.to_expr()
        return None

    def centered(self) -> "PeriodicFn":
        return center(self)

    def shifted(self, s: float) -> "PeriodicFn":
        if self.is_trig:
            return PeriodicFn(self.body.shifted(s), self.period)
        f = self._func
        return PeriodicFn(lambda t: f(t + s), self.period)

    def derivative(self, order: int | None = None) -> "PeriodicFn":
        """Exact for trig and expression bodies, spectral otherwise."""
        if self.is_trig:
            return PeriodicFn(trig_diff(self.body), self.period)
        if self.is_expr:
            return PeriodicFn(ep.diff(self.body), self.period)
        return PeriodicFn(trig_diff(spectral_projection(self, order)), self.period)

    def _combine(self, other, op: str) -> "PeriodicFn":
        if np.isscalar(other):
            other = PeriodicFn.constant(float(other), self.period)
        if not isinstance(other, PeriodicFn):
            return NotImplemented
        if not math.isclose(self.period, other.period, rel_tol=1e-14):
            raise ValueError(f"period mismatch: {self.period} vs {other.period}")
        if self.is_trig and other.is_trig and op in "+-":
            body = self.body + other.body if op == "+" else self.body - other.body
            return PeriodicFn(body, self.period)
        if self.is_trig and other.is_trig and op == "*":
            return PeriodicFn(trig_mul(self.body, other.body), self.period)
        ea, eb = self.to_expr(), other.to_expr()
        if ea is not None and eb is not None and (self.is_expr or other.is_expr):
            build = {"+": ep.add, "-": ep.sub, "*": ep.mul, "/": ep.div}[op]
            return PeriodicFn(build(ea, eb), self.period)
        f, g = self._func, other._func
        if op == "+":
            return PeriodicFn(lambda t: f(t) + g(t), self.period)
        if op == "-":
            return PeriodicFn(lambda t: f(t) - g(t), self.period)
        if op == "*":
            return PeriodicFn(lambda t: f(t) * g(t), self.period)
        return PeriodicFn(lambda t: ep._div(f(t), g(t)), self.period)

    def __add__(self, other):
        return self._combine(other, "+")

    def __sub__(self, other):
        return self._combine(other, "-")

    def __mul__(self, other):
        if np.isscalar(other):
            s = float(other)
            if self.is_trig:
                return PeriodicFn(self.body * s, self.period)
            if self.is_expr:
                return PeriodicFn(ep.mul(ep.num(s), self.body), self.period)
            f = self._func
            return PeriodicFn(lambda t: s * f(t), self.period)
        return self._combine(other, "*")

    __radd__ = __add__
    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, "/")

    def __neg__(self):
        return self * -1.0

    def __repr__(self) -> str:
        if self.label:
            desc = self.label
        elif self.is_expr:
            desc = ep.to_text(self.body)
            desc = desc if len(desc) < 60 else desc[:57] + "..."
        elif self.is_trig:
            desc = repr(self.body)
        else:
            desc = "<callable>"
        return f"PeriodicFn({desc}, T={self.period:.6g})"


def as_periodic(f, period: float | None = None) -> PeriodicFn:
    if isinstance(f, PeriodicFn):
        return f
    if isinstance(f, TrigPoly):
        return PeriodicFn(f, f.period)
    if np.isscalar(f):
        return PeriodicFn.constant(float(f), TWO_PI if period is None else period)
    if isinstance(f, (str, ep.Expr)):
        return PeriodicFn.from_expr(f, TWO_PI if period is None else period)
    raise TypeError(f"cannot interpret {type(f).__name__} as a periodic function")


# ---------------------------------------------------------------------------
# Quadrature and Fourier projection

def periodic_mean(func: Callable, period: float, n_samples: int = DEFAULT_SAMPLES,
                  rtol: float = QUAD_RTOL, max_samples: int = QUAD_MAX_SAMPLES) -> float:
    """Mean over one period by the uniform trapezoid rule.

    The grid doubles (reusing samples) until successive estimates agree to
    ``rtol`` relative to ``max(|mean|, mean(|f|))``.
    """
    n = int(n_samples)
    vals = np.asarray(func(np.arange(n) * period / n), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError("non-finite sample")
    est = float(np.mean(vals))
    scale = float(np.mean(np.abs(vals)))
    while True:
        mid = np.asarray(func((np.arange(n) + 0.5) * period / n), dtype=float)
        if not np.all(np.isfinite(mid)):
            raise DomainError("non-finite sample")
        new = 0.5 * (est + float(np.mean(mid)))
        scale = 0.5 * (scale + float(np.mean(np.abs(mid))))
        n *= 2
        if abs(new - est) <= rtol * max(abs(new), scale) or n >= max_samples:
            return new
        est = new


def average(f, n_samples: int = DEFAULT_SAMPLES) -> float:
    """``(1/T) int_0^T f``; exact (``c0``) for trig polynomials."""
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    if isinstance(f, TrigPoly):
        return f.c0
    f = as_periodic(f)
    if f.is_trig:
        return f.body.c0
    return periodic_mean(f, f.period, n_samples)


def center(f) -> PeriodicFn:
    """``f - mean(f)``."""
    if isinstance(f, TrigPoly):
        return PeriodicFn(TrigPoly(f.period, 0.0, f.a, f.b), f.period)
    f = as_periodic(f)
    if f.is_trig:
        return PeriodicFn(TrigPoly(f.period, 0.0, f.body.a, f.body.b), f.period)
    m = f.mean()
    if f.is_expr:
        out = PeriodicFn(ep.sub(f.body, ep.num(m)), f.period)
    else:
        g = f._func
        out = PeriodicFn(lambda t: g(t) - m, f.period)
    out._cache["mean"] = 0.0
    return out


def fourier_truncate(f, order: int, n_samples: int = DEFAULT_SAMPLES) -> TrigPoly:
    """Fourier coefficients up to ``order`` from discrete sums on a uniform grid.

    Trig polynomials are truncated/padded exactly. The grid has at least
    ``4*order`` points.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if isinstance(f, TrigPoly):
        return f.padded(order)
    f = as_periodic(f)
    if f.is_trig:
        return f.body.padded(order)
    if n_samples < 2 * order + 2:
        raise ValueError(f"n_samples={n_samples} too small for order {order}")
    n = max(int(n_samples), 4 * order)
    return _dft_coefficients(f.samples(n), order, f.period)


def _dft_coefficients(vals: np.ndarray, order: int, period: float) -> TrigPoly:
    n = vals.size
    j = np.arange(n)
    k = np.arange(1, order + 1)
    phase = TWO_PI * np.outer(k, j) / n
    a = (2.0 / n) * (np.cos(phase) @ vals)
    b = (2.0 / n) * (np.sin(phase) @ vals)
    return TrigPoly(period, float(np.mean(vals)), a, b)


def interpolate_samples(values, period: float = TWO_PI) -> TrigPoly:
    """Trigonometric interpolant through equispaced samples."""
    vals = np.asarray(values, dtype=float)
    n = vals.size
    if n < 2:
        raise ValueError("need at least two samples")
    m = (n - 1) // 2
    tp = _dft_coefficients(vals, m, period)
    if n % 2 == 0:
        # Nyquist cosine term, weight 1/N
        nyq = float(np.mean(vals * (-1.0) ** np.arange(n)))
        tp = TrigPoly(period, tp.c0, np.append(tp.a, nyq), np.append(tp.b, 0.0))
    return tp


def spectral_projection(f: PeriodicFn, order: int | None = None, tol: float = 1e-14,
                        max_order: int = 512) -> TrigPoly:
    """Fourier projection, doubling the order until the tail is negligible.

    With ``order`` given, that order is used as the starting point.
    """
    n = order or 64
    while True:
        tp = fourier_truncate(f, n, n_samples=max(DEFAULT_SAMPLES, 8 * n))
        tail = np.max(np.abs(np.concatenate((tp.a[-n // 8:], tp.b[-n // 8:]))))
        if tail <= tol * max(1.0, tp.coef_norm()) or n >= max_order:
            return tp
        n *= 2


def eval_at(f, t: float) -> float:
    """Value of ``f`` at ``t`` (periodic extension)."""
    return float(as_periodic(f)(float(t)))
