"""Floquet Green's coefficients of the oscillator with coupling g1 = cos(Omega t).

Only even harmonics mu = 2j couple, and only to their neighbours mu +- 2, so
at fixed frequency the truncated set j = -M..M is a tridiagonal system:

    G_mu(w) + chi(w + mu Om) [k+(w + (mu-2) Om) G_{mu-2}(w)
                              + k-(w + (mu+2) Om) G_{mu+2}(w)] = chi(w) delta_mu0

with k+-(w) = -(i/4)(w +- Om) gamma1~(w +- Om),
k0(w) = -i w gamma2~(w) + k+(w) + k-(w) and chi(w) = -1/(w^2 - w0^2 - k0(w)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .numerics import NumericsError, SingularSystemError, solve_tridiagonal_batch
from .spectral import BathConfig, Lorentzian


class TruncationError(NumericsError):
    def __init__(self, message, difference):
        super().__init__(message)
        self.difference = difference


DEFAULT_M = 8


@dataclass(frozen=True)
class KernelSet:
    omega0: float
    Omega: float
    bath1: BathConfig
    bath2: BathConfig

    def _q(self, x):
        # -(i/4) x gamma1~(x); k+(w) = q(w + Om), k-(w) = q(w - Om)
        x = np.asarray(x, dtype=float)
        return -0.25j * x * self.bath1.spectral.gamma_tilde(x)

    def k_plus(self, w):
        return self._q(np.asarray(w, dtype=float) + self.Omega)

    def k_minus(self, w):
        return self._q(np.asarray(w, dtype=float) - self.Omega)

    def k0(self, w):
        w = np.asarray(w, dtype=float)
        return -1j * w * self.bath2.spectral.gamma_tilde(w) + self.k_plus(w) + self.k_minus(w)

    def chi(self, w):
        w = np.asarray(w, dtype=float)
        return -1.0 / (w ** 2 - self.omega0 ** 2 - self.k0(w))

    def chi0(self, w):
        """Bare susceptibility, dressed by the static bath only."""
        w = np.asarray(w, dtype=float)
        return -1.0 / (w ** 2 - self.omega0 ** 2 + 1j * w * self.bath2.spectral.gamma_tilde(w))

    def features(self):
        """Frequencies (positive) around which the coefficients vary sharply."""
        out = [self.omega0]
        out += list(self.bath1.spectral.feature_frequencies)
        out += list(self.bath2.spectral.feature_frequencies)
        return out


def build_kernels(omega0, Omega, bath1: BathConfig, bath2: BathConfig) -> KernelSet:
    if not Omega > 0:
        raise ValueError("drive frequency must be positive")
    return KernelSet(float(omega0), float(Omega), bath1, bath2)


@dataclass
class FloquetSolution:
    """Coefficients ``values[n, j]`` = G_{2(j-M)}(omega[n])."""
    omega: np.ndarray
    values: np.ndarray
    M: int
    residual: np.ndarray

    def G(self, mu):
        if mu % 2 or abs(mu) > 2 * self.M:
            return np.zeros(len(self.omega), dtype=complex)
        return self.values[:, mu // 2 + self.M]

    @property
    def mus(self):
        return np.arange(-2 * self.M, 2 * self.M + 1, 2)


def _bands(kernels: KernelSet, w, M):
    """Sub-, main- and super-diagonal plus right-hand side for nodes ``w``."""
    Om = kernels.Omega
    w = np.asarray(w, dtype=float)[:, None]
    j = np.arange(-M, M + 1)[None, :]
    odd = np.arange(-2 * M - 1, 2 * M + 2, 2)[None, :]
    q = kernels._q(w + odd * Om)           # q at w + (2j -+ 1) Om
    q_lo, q_hi = q[:, :-1], q[:, 1:]       # (2j-1) and (2j+1)
    x = w + 2 * j * Om
    k0 = -1j * x * kernels.bath2.spectral.gamma_tilde(x) + q_lo + q_hi
    chi = -1.0 / (x ** 2 - kernels.omega0 ** 2 - k0)
    lower = (chi * q_lo)[:, 1:]            # coefficient of G_{mu-2}
    upper = (chi * q_hi)[:, :-1]           # coefficient of G_{mu+2}
    diag = np.ones_like(chi)
    rhs = np.zeros_like(chi)
    rhs[:, M] = chi[:, M]
    return lower, diag, upper, rhs


def solve_floquet_batch(kernels: KernelSet, w, M: int = DEFAULT_M) -> FloquetSolution:
    """Solve the truncated recursion independently at every node of ``w``."""
    if M < 0:
        raise ValueError("truncation order must be non-negative")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    lower, diag, upper, rhs = _bands(kernels, w, M)
    try:
        x = solve_tridiagonal_batch(lower, diag, upper, rhs)
    except SingularSystemError:
        # near-singular column: nudge the offending frequency once
        x = np.empty_like(rhs)
        for n, wn in enumerate(w):
            try:
                x[n] = solve_tridiagonal_batch(*(b[n:n + 1] for b in (lower, diag, upper, rhs)))[0]
            except SingularSystemError:
                bands = _bands(kernels, np.array([wn * (1 + 1e-9) + 1e-12]), M)
                x[n] = solve_tridiagonal_batch(*bands)[0]
    r = diag * x - rhs
    r[:, 1:] += lower * x[:, :-1]
    r[:, :-1] += upper * x[:, 1:]
    res = np.linalg.norm(r, axis=1) / np.maximum(np.linalg.norm(rhs, axis=1), 1e-300)
    return FloquetSolution(w, x, M, res)


def solve_floquet(kernels: KernelSet, w: float, M: int = DEFAULT_M) -> dict:
    """Coefficients at a single frequency as ``{mu: G_mu(w)}``."""
    if M < 1:
        raise ValueError("truncation order must be at least 1")
    sol = solve_floquet_batch(kernels, [w], M)
    return {int(mu): complex(sol.G(int(mu))[0]) for mu in sol.mus}


def truncation_difference(kernels, w, M):
    a = solve_floquet_batch(kernels, w, M)
    b = solve_floquet_batch(kernels, w, M + 2)
    return float(np.max(np.abs(b.values[:, 2:-2] - a.values))), b


def converge_truncation(kernels: KernelSet, w, tol: float = 1e-12, M_start: int = 1,
                        M_max: int = 512):
    """Smallest tested M (doubling from ``M_start``) with sup|G(M) - G(M+2)| < tol.

    ``tol`` is relative to the largest coefficient magnitude on ``w``.
    Returns ``(M, solution at M)``.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    M = max(int(M_start), 1)
    while True:
        sol = solve_floquet_batch(kernels, w, M)
        scale = max(np.max(np.abs(sol.values)), 1e-300)
        diff, _ = truncation_difference(kernels, w, M)
        if diff < tol * scale:
            return M, sol
        if 2 * M > M_max:
            raise TruncationError(
                f"truncation not converged at M={M} (difference {diff:.3g})", diff)
        M *= 2


def probe_frequencies(kernels: KernelSet, n_side: int = 3):
    """Frequencies at which truncation convergence is judged."""
    feats = np.array(kernels.features())
    Om = kernels.Omega
    shifts = np.arange(-n_side, n_side + 1) * Om
    pts = (feats[:, None] + shifts[None, :]).ravel()
    pts = np.concatenate([pts, -pts, np.linspace(-3, 3, 13) * max(feats.max(), Om)])
    return np.unique(pts)


def detuned_resonance(kappa, gamma1, bath2: BathConfig, omega0=1.0, Omega=None,
                      omega1=None, temperature1=0.0, bracket=(1e-3, 10.0)):
    """Renormalised resonance: w^2 - w0^2 - Re k0(w) = 0 with omega1 = w - Omega.

    Exactly one of ``Omega`` and ``omega1`` is given; the other follows from
    the self-consistency. Returns ``(w*, omega1*, Omega*)``.
    """
    if (Omega is None) == (omega1 is None):
        raise ValueError("give exactly one of Omega and omega1")

    def pieces(w):
        if Omega is not None:
            Om, w1 = Omega, w - Omega
        else:
            Om, w1 = w - omega1, omega1
        return Om, w1

    def residual(w):
        Om, w1 = pieces(w)
        if w1 <= 0 or Om <= 0:
            return np.nan
        bath1 = BathConfig(Lorentzian.from_kappa(kappa, gamma1, w1, omega0), temperature1)
        k = build_kernels(omega0, Om, bath1, bath2)
        return float(w ** 2 - omega0 ** 2 - k.k0(np.array([w]))[0].real)

    lo = (Omega if Omega is not None else omega1) + 1e-9
    lo = max(lo, bracket[0])
    # damped fixed-point iteration from the bare resonance, then polish
    w = max(omega0, lo * (1 + 1e-6))
    for _ in range(200):
        Om, w1 = pieces(w)
        if w1 <= 0 or Om <= 0:
            break
        r = residual(w)
        w_new = np.sqrt(max(w ** 2 - r, lo ** 2 * (1 + 1e-9)))
        if abs(w_new - w) < 1e-14:
            w = w_new
            break
        w = 0.5 * w + 0.5 * w_new
    # bracket the root around the iterate and refine
    if np.isfinite(residual(w)) and abs(residual(w)) < 1e-10:
        Om, w1 = pieces(w)
        return w, w1, Om
    grid = np.concatenate([np.linspace(lo * (1 + 1e-7), bracket[1], 4001), [w]])
    grid.sort()
    vals = np.array([residual(g) for g in grid])
    ok = np.isfinite(vals)
    sign_change = np.flatnonzero(ok[:-1] & ok[1:] & (np.sign(vals[:-1]) != np.sign(vals[1:])))
    if len(sign_change) == 0:
        raise NumericsError("no self-consistent resonance in bracket")
    roots = [brentq(residual, grid[i], grid[i + 1], xtol=1e-15, rtol=4e-16) for i in sign_change]
    w = min(roots, key=lambda r: abs(r - omega0))
    Om, w1 = pieces(w)
    return w, w1, Om
