"""Bath models: spectral densities, damping transforms and noise spectra.

Units: omega0 = m = hbar = k_B = 1. A spectral density J(w) is odd in w;
its damping transform gamma~(w) is the one-sided Fourier transform of the
memory-friction kernel, with ``w * Re gamma~(w) = J(w)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .numerics import QuadratureSpec, integrate_pv


def bose(x):
    """Bose occupation 1/(e^x - 1); valid for either sign of x."""
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / np.expm1(x)


def _bose_of(w, T):
    """n_B(w/T) including the T = 0 limit (0 for w > 0, -1 for w < 0)."""
    w = np.asarray(w, dtype=float)
    if T == 0:
        return np.where(w > 0, 0.0, np.where(w < 0, -1.0, np.nan))
    return bose(w / T)


class SpectralDensity:
    """Base class; subclasses implement ``j`` for w >= 0 and ``gamma_tilde``."""

    def j(self, w):
        w = np.asarray(w, dtype=float)
        return np.sign(w) * self._j_pos(np.abs(w))

    def j_over_w(self, w):
        """J(w)/w, finite at w = 0."""
        w = np.abs(np.asarray(w, dtype=float))
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self._j_pos(w) / w
        if np.ndim(out) == 0:
            return float(self._slope0()) if w == 0 else float(out)
        out[w == 0] = self._slope0()
        return out

    def _slope0(self):
        return self._j_pos(np.array([1e-300]))[0] / 1e-300

    def j_coth(self, w, T):
        """J(w) coth(w/2T): even in w, with its w -> 0 and T -> 0 limits."""
        w = np.asarray(w, dtype=float)
        aw = np.abs(w)
        if T == 0:
            return self._j_pos(aw)
        x = aw / (2 * T)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            out = self._j_pos(aw) / np.tanh(x)
        small = aw == 0
        if np.any(small):
            out = np.where(small, 2 * T * self._slope0(), out)
        return out

    def j_bose(self, w, T):
        """J(w) n_B(w/T), finite at w = 0 (value T * J'(0))."""
        w = np.asarray(w, dtype=float)
        with np.errstate(invalid="ignore"):
            out = self.j(w) * _bose_of(w, T)
        zero = w == 0
        if np.any(zero):
            out = np.where(zero, T * self._slope0(), out)
        return out

    @property
    def feature_frequencies(self):
        """Positive frequencies where J has structure (peaks, edges)."""
        return ()

    @property
    def scale(self):
        return 1.0


@dataclass(frozen=True)
class Ohmic(SpectralDensity):
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("Ohmic rate must be non-negative")

    def _j_pos(self, w):
        return self.gamma * np.asarray(w, dtype=float)

    def _slope0(self):
        return self.gamma

    def gamma_tilde(self, w):
        return np.full(np.shape(w), self.gamma, dtype=complex)


@dataclass(frozen=True)
class Lorentzian(SpectralDensity):
    """J(w) = d1 gamma1 w / ((w^2 - omega1^2)^2 + gamma1^2 w^2)."""
    d1: float
    gamma1: float
    omega1: float

    def __post_init__(self):
        if not (self.d1 >= 0 and self.gamma1 > 0 and self.omega1 > 0):
            raise ValueError("Lorentzian needs d1 >= 0 and positive width/peak")

    @classmethod
    def from_kappa(cls, kappa, gamma1, omega1, omega0=1.0):
        """Build from the dimensionless coupling kappa = d1/(omega0^2 omega1^2)."""
        if kappa < 0:
            raise ValueError("kappa must be non-negative")
        return cls(kappa * omega0 ** 2 * omega1 ** 2, gamma1, omega1)

    def kappa(self, omega0=1.0):
        return self.d1 / (omega0 ** 2 * self.omega1 ** 2)

    def _den(self, w):
        return (w ** 2 - self.omega1 ** 2) ** 2 + self.gamma1 ** 2 * w ** 2

    def _j_pos(self, w):
        w = np.asarray(w, dtype=float)
        return self.d1 * self.gamma1 * w / self._den(w)

    def _slope0(self):
        return self.d1 * self.gamma1 / self.omega1 ** 4

    def gamma_tilde(self, w):
        w = np.asarray(w, dtype=float)
        g, w1 = self.gamma1, self.omega1
        return (self.d1 / w1 ** 2) * (g - 1j * w) / (w1 ** 2 - w ** 2 - 1j * g * w)

    @property
    def feature_frequencies(self):
        return (self.omega1,)

    @property
    def scale(self):
        return self.omega1


@dataclass(frozen=True)
class PowerLaw(SpectralDensity):
    """J(w) = gamma w |w/omegabar|^(s-1) theta(omega_c - |w|).

    The imaginary part of gamma~ follows from a principal-value Hilbert
    transform of Re gamma~ = J/w; it is tabulated once on a grid and
    interpolated with a cubic spline.
    """
    gamma: float
    s: float
    omegabar: float = 1.0
    omega_c: float = 1e4
    kk_grid_max: float = 20.0
    kk_points: int = 401
    _kk: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.gamma >= 0 and self.s > 0 and self.omegabar > 0 and self.omega_c > 0):
            raise ValueError("PowerLaw needs gamma >= 0 and s, omegabar, omega_c > 0")

    def _j_pos(self, w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.gamma * w * (w / self.omegabar) ** (self.s - 1)
        out = np.where(w == 0, 0.0, out)
        return np.where(w <= self.omega_c, out, 0.0)

    def _slope0(self):
        if self.s > 1:
            return 0.0
        if self.s == 1:
            return self.gamma
        return np.inf

    def re_gamma_tilde(self, w):
        w = np.abs(np.asarray(w, dtype=float))
        with np.errstate(divide="ignore"):
            out = self.gamma * (w / self.omegabar) ** (self.s - 1)
        return np.where(w <= self.omega_c, out, 0.0)

    def im_gamma_tilde_exact(self, w, spec: QuadratureSpec | None = None):
        """Im gamma~(w) = (2w/pi) PV int_0^omega_c R(x) / (w^2 - x^2) dx."""
        spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)
        w = float(abs(w))
        if w == 0:
            return 0.0
        if w >= self.omega_c:
            # pole outside the support: an ordinary integral
            val, _ = quad(lambda x: self.re_gamma_tilde(x) / (w ** 2 - x ** 2),
                          0.0, self.omega_c, limit=200)
            return float(2.0 * w / np.pi * val)
        # substitute x = w y so the pole sits at y = 1; the integrable
        # y^(s-1) endpoint singularity is left to the adaptive rule
        scale = self.gamma * (w / self.omegabar) ** (self.s - 1)

        def num(y):
            y = np.asarray(y, dtype=float)
            with np.errstate(divide="ignore"):
                return -np.where(y > 0, y ** (self.s - 1), 0.0)
        upper = self.omega_c / w
        pv = integrate_pv(num, 1.0, spec, lower=0.0, upper=upper, scale=1.0)
        return float(2.0 / np.pi * scale * pv)

    def _table(self):
        if self._kk is None:
            hi = min(self.kk_grid_max, 0.999 * self.omega_c)
            grid = np.linspace(0.0, hi, self.kk_points)
            vals = np.array([self.im_gamma_tilde_exact(x) for x in grid])
            object.__setattr__(self, "_kk", CubicSpline(grid, vals))
        return self._kk

    def gamma_tilde(self, w):
        w = np.asarray(w, dtype=float)
        table = self._table()
        hi = table.x[-1]
        aw = np.abs(w)
        im = np.where(aw <= hi, table(np.minimum(aw, hi)), 0.0)
        beyond = aw > hi
        if np.any(beyond):
            im = np.array(im, dtype=float)
            im[beyond] = [self.im_gamma_tilde_exact(x) for x in aw[beyond]]
        return self.re_gamma_tilde(w) + 1j * np.sign(w) * im

    @property
    def feature_frequencies(self):
        return (self.omegabar,) if self.omega_c > 1e3 else (self.omegabar, self.omega_c)


@dataclass(frozen=True)
class BathConfig:
    spectral: SpectralDensity
    temperature: float

    def __post_init__(self):
        if not self.temperature >= 0:
            raise ValueError("bath temperature must be non-negative")


def eval_j(sd: SpectralDensity, w):
    return sd.j(w)


def gamma_tilde(sd: SpectralDensity, w):
    return sd.gamma_tilde(w)


def noise_psd(bath: BathConfig, w):
    """Fourier transform of the force correlator: 2 J(w) [1 + n_B(w/T)]."""
    w = np.asarray(w, dtype=float)
    sd, T = bath.spectral, bath.temperature
    pos = 2 * (sd.j(w) + sd.j_bose(w, T))
    if T == 0:
        return np.where(w > 0, 2 * sd.j(w), 0.0)
    return pos
