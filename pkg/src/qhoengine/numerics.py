"""Quadrature and linear-algebra primitives shared by the physics modules.

Integrals over the real line are compactified with ``omega = L*tan(u)`` and
evaluated with a vectorised, globally adaptive Gauss-Kronrod (7/15) rule.
Integrands take a 1-d array of abscissae and return an array whose first
axis matches it; extra trailing axes are integrated component-wise, which
lets several related integrals share one set of function evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded


class NumericsError(RuntimeError):
    pass


class QuadratureError(NumericsError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SingularSystemError(NumericsError):
    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    omega_max: float | None = None  # None -> 50 * scale of the problem
    max_nodes: int = 3_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.omega_max is not None and not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        if self.max_nodes < 16:
            raise ValueError("node budget must be at least 16")


DEFAULT_QUAD = QuadratureSpec()

# Gauss-Kronrod 15-point nodes (positive half) and weights; the 7-point Gauss
# rule uses every odd-indexed Kronrod node.
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
W_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[1:7:2] = _WG[:3]
W_GAUSS[7] = _WG[3]
W_GAUSS[9:14:2] = _WG[:3][::-1]


def _gk15(f, a, b):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()))
    fx = fx.reshape((len(a), 15) + fx.shape[1:])
    wshape = (1, 15) + (1,) * (fx.ndim - 2)
    hshape = (-1,) + (1,) * (fx.ndim - 2)
    k = half.reshape(hshape) * np.sum(W_KRONROD.reshape(wshape) * fx, axis=1)
    g = half.reshape(hshape) * np.sum(W_GAUSS.reshape(wshape) * fx, axis=1)
    return k, np.abs(k - g)


def adaptive_gk(f, breakpoints: Sequence[float], spec: QuadratureSpec = DEFAULT_QUAD,
                min_width: float = 0.0):
    """Integrate ``f`` over the partition given by sorted ``breakpoints``.

    Returns ``(value, error)``; both carry the trailing shape of ``f``.
    Raises QuadratureError when the node budget runs out.
    """
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if len(pts) < 2:
        raise ValueError("need at least two breakpoints")
    a, b = pts[:-1], pts[1:]
    done_val = 0.0
    done_err = 0.0
    nodes = 0
    while True:
        val, err = _gk15(f, a, b)
        nodes += 15 * len(a)
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(err))):
            raise QuadratureError("integrand is not finite on the integration nodes")
        total = done_val + val.sum(axis=0)
        total_err = done_err + err.sum(axis=0)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            return total, total_err
        if nodes >= spec.max_nodes:
            raise QuadratureError(
                f"no convergence within {spec.max_nodes} nodes "
                f"(error {np.max(total_err):.3g}, tolerance {np.min(tol):.3g})",
                estimate=total, error=total_err)
        # Intervals whose error is a non-negligible share of the budget get
        # bisected; the rest are frozen.
        share = err / (tol / len(a))
        if share.ndim > 1:
            share = share.reshape(len(a), -1).max(axis=1)
        split = share > 1.0
        if min_width > 0:
            split &= (b - a) > min_width
        if not np.any(split):
            split = share >= share.max()
        keep = ~split
        done_val = done_val + val[keep].sum(axis=0)
        done_err = done_err + err[keep].sum(axis=0)
        mid = 0.5 * (a[split] + b[split])
        a, b = np.concatenate([a[split], mid]), np.concatenate([mid, b[split]])


def _mapped(f, scale, shift=0.0):
    def g(u):
        t = np.tan(u)
        jac = scale / np.cos(u) ** 2
        fx = np.asarray(f(shift + scale * t))
        return fx * jac.reshape((-1,) + (1,) * (fx.ndim - 1))
    return g


def integrate(f: Callable, a: float, b: float, spec: QuadratureSpec = DEFAULT_QUAD,
              points: Sequence[float] = (), scale: float = 1.0, n_init: int = 8):
    """Adaptive integral of ``f`` over [a, b]; either end may be infinite.

    Infinite ends are handled with the tangent map of width ``scale``.
    ``points`` are interior abscissae where the integrand has structure
    (peaks, kinks); each becomes a breakpoint. Returns the value only.
    """
    value, _ = integrate_with_error(f, a, b, spec, points, scale, n_init)
    return value


def integrate_with_error(f, a, b, spec=DEFAULT_QUAD, points=(), scale=1.0, n_init=8):
    if not b > a:
        raise ValueError("integration bounds must satisfy a < b")
    pts = [p for p in points if a < p < b]
    if np.isinf(a) and np.isinf(b):
        g, to_u = _mapped(f, scale), lambda w: np.arctan(w / scale)
        lo, hi = -np.pi / 2, np.pi / 2
    elif np.isinf(b):
        g, to_u = _mapped(f, scale, a), lambda w: np.arctan((w - a) / scale)
        lo, hi = 0.0, np.pi / 2
    elif np.isinf(a):
        g, to_u = _mapped(f, scale, b), lambda w: np.arctan((w - b) / scale)
        lo, hi = -np.pi / 2, 0.0
    else:
        g, to_u = f, lambda w: w
        lo, hi = a, b
    bps = np.concatenate([np.linspace(lo, hi, n_init + 1),
                          to_u(np.asarray(pts, dtype=float))])
    return adaptive_gk(g, bps, spec)


def integrate_infinite(f: Callable, spec: QuadratureSpec = DEFAULT_QUAD,
                       points: Sequence[float] = (), scale: float = 1.0):
    """Integral of ``f`` over the whole real line."""
    return integrate(f, -np.inf, np.inf, spec, points, scale)


def integrate_pv(f: Callable, pole: float, spec: QuadratureSpec = DEFAULT_QUAD,
                 lower: float = 0.0, upper: float = np.inf,
                 points: Sequence[float] = (), scale: float = 1.0):
    """Cauchy principal value of ``int f(w) / (w**2 - pole**2) dw``.

    The pole term ``f(pole) / (w**2 - pole**2)`` is subtracted and integrated
    in closed form; the regular remainder goes through ordinary quadrature.
    ``f`` must be smooth near ``pole``.
    """
    if not pole > 0:
        raise ValueError("pole must be positive")
    if not lower < pole < upper:
        raise ValueError(f"pole {pole} lies outside ({lower}, {upper})")
    f_pole = np.asarray(f(np.array([pole])))[0]
    eps = 1e-6 * pole

    def remainder(w):
        w = np.asarray(w, dtype=float)
        fw = np.asarray(f(w))
        den = w ** 2 - pole ** 2
        near = np.abs(w - pole) < eps
        safe = np.where(near, 1.0, den)
        out = (fw - f_pole) / safe.reshape((-1,) + (1,) * (fw.ndim - 1))
        if np.any(near):
            # derivative limit f'(pole) / (2 pole) by central difference
            d = np.asarray(f(np.array([pole + eps, pole - eps])))
            out[near] = (d[0] - d[1]) / (2 * eps) / (2 * pole)
        return out

    regular = integrate(remainder, lower, upper, spec, [pole, *points], scale)
    return regular + f_pole * _pv_pole_term(pole, lower, upper)


def _pv_pole_term(p, a, b):
    """PV of int_a^b dw / (w^2 - p^2) with a < p < b, a >= -p."""
    def anti(w):
        if np.isinf(w):
            return 0.0
        return np.log(abs((w - p) / (w + p))) / (2 * p)
    return anti(b) - anti(a)


# ---------------------------------------------------------------- tridiagonal

@dataclass(frozen=True)
class ComplexTridiagonal:
    """``lower[i]`` couples row i+1 to column i; ``upper[i]`` row i to i+1."""
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if n < 1 or len(self.lower) != n - 1 or len(self.upper) != n - 1:
            raise ValueError("inconsistent tridiagonal band lengths")

    @property
    def n(self):
        return len(self.diag)

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y

    def dense(self):
        return (np.diag(self.diag) + np.diag(self.lower, -1)
                + np.diag(self.upper, 1)).astype(complex)


RESIDUAL_TOL = 1e-12


def solve_tridiagonal(system: ComplexTridiagonal, rhs) -> np.ndarray:
    """Solve one complex tridiagonal system, checking the residual."""
    lo = np.asarray(system.lower, dtype=complex)[None, :]
    di = np.asarray(system.diag, dtype=complex)[None, :]
    up = np.asarray(system.upper, dtype=complex)[None, :]
    return solve_tridiagonal_batch(lo, di, up, np.asarray(rhs, dtype=complex)[None, :])[0]


def _residual(lower, diag, upper, x, rhs):
    r = diag * x - rhs
    r[:, 1:] += lower * x[:, :-1]
    r[:, :-1] += upper * x[:, 1:]
    return np.linalg.norm(r, axis=1)


def solve_tridiagonal_batch(lower, diag, upper, rhs) -> np.ndarray:
    """Solve N independent tridiagonal systems stacked along axis 0.

    Thomas elimination is tried first for every row; rows whose residual
    exceeds ``1e-12 * |rhs|`` are redone with LAPACK's partially pivoted
    banded solver. Raises SingularSystemError if that also fails.
    """
    diag = np.asarray(diag, dtype=complex)
    lower = np.asarray(lower, dtype=complex)
    upper = np.asarray(upper, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    nsys, n = diag.shape
    cp = np.empty((nsys, max(n - 1, 0)), dtype=complex)
    dp = np.empty((nsys, n), dtype=complex)
    with np.errstate(all="ignore"):
        denom = diag[:, 0]
        if n > 1:
            cp[:, 0] = upper[:, 0] / denom
        dp[:, 0] = rhs[:, 0] / denom
        for i in range(1, n):
            denom = diag[:, i] - lower[:, i - 1] * cp[:, i - 1]
            if i < n - 1:
                cp[:, i] = upper[:, i] / denom
            dp[:, i] = (rhs[:, i] - lower[:, i - 1] * dp[:, i - 1]) / denom
        x = np.empty_like(dp)
        x[:, -1] = dp[:, -1]
        for i in range(n - 2, -1, -1):
            x[:, i] = dp[:, i] - cp[:, i] * x[:, i + 1]
        res = _residual(lower, diag, upper, x, rhs)
    bnorm = np.linalg.norm(rhs, axis=1)
    bad = ~(res <= RESIDUAL_TOL * np.maximum(bnorm, np.finfo(float).tiny))
    for k in np.flatnonzero(bad):
        x[k] = _pivoted_solve(lower[k], diag[k], upper[k], rhs[k])
    return x


def _pivoted_solve(lower, diag, upper, rhs):
    n = len(diag)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    system = ComplexTridiagonal(lower, diag, upper)
    try:
        x = solve_banded((1, 1), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(str(exc), np.linalg.cond(system.dense())) from exc
    r = np.linalg.norm(system.matvec(x) - rhs)
    if not r <= RESIDUAL_TOL * np.linalg.norm(rhs):
        cond = np.linalg.cond(system.dense())
        raise SingularSystemError(
            f"tridiagonal residual {r:.3g} exceeds bound (condition ~{cond:.3g})", cond)
    return x
