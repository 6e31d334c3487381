"""Thermodynamics to first order in the modulated-bath coupling.

Closed-form quadratures in the bare susceptibility
chi0(w) = -1 / (w^2 - w0^2 + i w gamma2~(w)), the sharp-resonance channel
pieces p = +-1, the effective Otto cycle that reproduces them, and the
certificate showing power-law baths with s <= 1 cannot run an engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numerics import NumericsError, integrate
from .spectral import _bose_of
from .thermo import EngineConfig

VALIDITY_RATIO = 0.1


class ModelDomainError(NumericsError, ValueError):
    """Parameters outside the range where the effective model makes sense."""


def chi0(cfg: EngineConfig, w):
    w = np.asarray(w, dtype=float)
    return -1.0 / (w ** 2 - cfg.omega0 ** 2 + 1j * w * cfg.bath2.spectral.gamma_tilde(w))


def _jn(sd, x, T):
    """J(x) n_B(x/T) for either sign of x, finite at x = 0."""
    return sd.j_bose(x, T)


def _f(cfg: EngineConfig, w, wm, Om):
    """f with the lower sideband offset ``wm = w - Om`` supplied separately."""
    sd, T1, T2 = cfg.bath1.spectral, cfg.bath1.temperature, cfg.bath2.temperature
    wp = w + Om
    dj = sd.j(wm) - sd.j(wp)
    # n_B(w/T2) diverges at w = 0; the term is zero whenever dj is
    with np.errstate(invalid="ignore"):
        static = np.where(dj == 0, 0.0, dj * _bose_of(w, T2))
    return _jn(sd, wp, T1) - _jn(sd, wm, T1) + static


def f_function(cfg: EngineConfig, w, Omega=None):
    """Engine indicator f(w, Omega); the power is negative where it is positive."""
    Om = cfg.Omega if Omega is None else Omega
    w = np.asarray(w, dtype=float)
    return _f(cfg, w, w - Om, Om)


def _points(cfg: EngineConfig):
    Om, w0 = cfg.Omega, cfg.omega0
    feats = [w0] + list(cfg.bath1.spectral.feature_frequencies)
    pts = [w0, Om]
    for f in feats:
        pts += [f + Om, abs(f - Om)]
    return sorted({p for p in pts if p > 0})


def weak_power(cfg: EngineConfig):
    """-Omega int_0^inf dw/2pi Im chi0(w) f(w, Omega)."""
    Om = cfg.Omega
    s = getattr(cfg.bath1.spectral, "s", 1.0)
    if s >= 1:
        def integrand(w):
            return chi0(cfg, w).imag * f_function(cfg, w)
        val = integrate(integrand, 0.0, np.inf, cfg.quad, _points(cfg), scale=cfg.scale, n_init=32)
    else:
        val = _integrate_sub_ohmic(cfg, s)
    return -Om * val / (2 * np.pi)


def _integrate_sub_ohmic(cfg: EngineConfig, s):
    """J(x) n_B(x/T1) ~ x^(s-1) makes f singular at w = Omega. With
    w = Omega +- t^(1/s) the Jacobian cancels the singularity; the offset
    t^(1/s) is passed on exactly so it never rounds into the pole."""
    Om, q = cfg.Omega, 1.0 / s

    def side(sign):
        def g(t):
            t = np.asarray(t, dtype=float)
            d = sign * t ** q
            w = Om + d
            return chi0(cfg, w).imag * _f(cfg, w, d, Om) * q * t ** (q - 1)
        return g

    pts = np.array(_points(cfg))
    left = integrate(side(-1), 0.0, Om ** s, cfg.quad, (Om - pts[pts < Om]) ** s)
    right = integrate(side(1), 0.0, np.inf, cfg.quad, (pts[pts > Om] - Om) ** s,
                      scale=cfg.scale ** s, n_init=32)
    return left + right


def _w_coth(w, T):
    """w coth(w / 2T), with value 2T at w = 0 and |w| at T = 0."""
    w = np.asarray(w, dtype=float)
    if T == 0:
        return np.abs(w)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = w / np.tanh(w / (2 * T))
    return np.where(w == 0, 2 * T, out)


def weak_currents(cfg: EngineConfig):
    """(J1, J2) at first order; both integrals run over the whole real line."""
    Om = cfg.Omega
    sd, T1, T2 = cfg.bath1.spectral, cfg.bath1.temperature, cfg.bath2.temperature

    def integrand(w):
        im = chi0(cfg, w).imag
        wp = w + Om
        jc1 = sd.j_coth(wp, T1)                   # J1(w+Om) coth((w+Om)/2T1)
        # J1(w+Om) coth(w/2T2) Im chi0(w), regular at w = 0 since Im chi0 ~ w
        with np.errstate(invalid="ignore", divide="ignore"):
            c2 = np.where(w == 0, 0.0, sd.j(wp) * _w_coth(w, T2) * im / np.where(w == 0, 1, w))
        j2 = -(w * jc1 * im - w * c2)
        j1 = wp * jc1 * im - wp * c2
        return np.stack([j1, j2], axis=-1) / (4 * np.pi)

    pts = _points(cfg)
    pts = sorted(set(pts + [-p for p in pts] + [0.0, -Om]))
    val = integrate(integrand, -np.inf, np.inf, cfg.quad, pts, scale=cfg.scale, n_init=32)
    return float(val[0]), float(val[1])


def weak_power_pieces(cfg: EngineConfig):
    """First-order (P^(a), P^(b,2)); P^(b,1) is second order and omitted."""
    Om = cfg.Omega
    sd, T1, T2 = cfg.bath1.spectral, cfg.bath1.temperature, cfg.bath2.temperature

    def integrand(w):
        pa = -Om / (4 * np.pi) * sd.j_coth(w, T1) * chi0(cfg, w - Om).imag
        im = chi0(cfg, w).imag
        with np.errstate(invalid="ignore", divide="ignore"):
            coth2_im = np.where(w == 0, 0.0, _w_coth(w, T2) * im / np.where(w == 0, 1, w))
        pb2 = Om / (8 * np.pi) * coth2_im * (sd.j(w + Om) - sd.j(w - Om))
        return np.stack([pa, pb2], axis=-1)

    pts = _points(cfg)
    pts = sorted(set(pts + [-p for p in pts] + [0.0] + [p + Om for p in pts]))
    val = integrate(integrand, -np.inf, np.inf, cfg.quad, pts, scale=cfg.scale, n_init=32)
    return float(val[0]), float(val[1])


def validity_ratio(cfg: EngineConfig):
    """kappa w0^2 / (gamma1 gamma2); heuristic, weak results are trusted below 0.1."""
    kappa = cfg.kappa
    if kappa is None:
        return math.nan
    return kappa * cfg.omega0 ** 2 / (cfg.bath1.spectral.gamma1 * cfg.gamma2)


# -- sharp-resonance channels ------------------------------------------------

def _occupation_gap(cfg: EngineConfig, p):
    w0, Om = cfg.omega0, cfg.Omega
    wp = w0 + p * Om
    n1 = float(_bose_of(wp, cfg.bath1.temperature))
    n2 = float(_bose_of(w0, cfg.bath2.temperature))
    return wp, float(cfg.bath1.spectral.j(wp)), n1 - n2


def channel(cfg: EngineConfig, p: int):
    """(P^(p), J1^(p), J2^(p)) with Im chi0 replaced by its delta-peak limit."""
    if p not in (1, -1):
        raise ValueError("channel index must be +1 or -1")
    w0 = cfg.omega0
    wp, j, gap = _occupation_gap(cfg, p)
    P = -cfg.Omega / (4 * w0) * p * j * gap
    J1 = wp / (4 * w0) * j * gap
    J2 = -0.25 * j * gap
    return P, J1, J2


@dataclass
class WeakReport:
    P: float
    J1: float
    J2: float
    channels: dict          # p -> (P^(p), J1^(p), J2^(p))
    validity_ratio: float

    @property
    def valid(self):
        return not (self.validity_ratio > VALIDITY_RATIO)

    @property
    def channel_sum(self):
        return tuple(sum(c[i] for c in self.channels.values()) for i in range(3))


def channel_decomposition(cfg: EngineConfig, quadrature: bool = True) -> WeakReport:
    """Channel pieces plus (optionally) the first-order quadratures."""
    chans = {p: channel(cfg, p) for p in (1, -1)}
    if quadrature:
        P = weak_power(cfg)
        J1, J2 = weak_currents(cfg)
    else:
        P, J1, J2 = (sum(c[i] for c in chans.values()) for i in range(3))
    return WeakReport(P, J1, J2, chans, validity_ratio(cfg))


# -- effective Otto cycle -------------------------------------------------------

@dataclass
class OttoCycle:
    p: int
    omega_high: float
    omega_low: float
    N_A: float
    N_B: float
    N_C: float
    N_D: float
    Q1: float
    Q2: float
    W: float
    tau1: float
    tau2: float
    tau_is: float
    eta: float

    @property
    def is_engine(self):
        return self.W < 0

    @property
    def power(self):
        return self.W / self.tau1

    @property
    def currents(self):
        return self.Q1 / self.tau1, self.Q2 / self.tau1


def otto_cycle(p: int, cfg: EngineConfig) -> OttoCycle:
    """Otto cycle whose isochores thermalise with bath 1 at w0 + p Omega and
    with bath 2 at w0; the isentropes keep the occupations fixed."""
    if p not in (1, -1):
        raise ValueError("channel index must be +1 or -1")
    w0, Om = cfg.omega0, cfg.Omega
    if p == -1 and Om >= w0:
        raise ModelDomainError("the p = -1 cycle needs Omega < omega0")
    wb = w0 + p * Om
    NB = float(_bose_of(wb, cfg.bath1.temperature))
    NA = float(_bose_of(w0, cfg.bath2.temperature))
    dN = NB - NA
    j1 = float(cfg.bath1.spectral.j(wb))
    j2 = float(cfg.bath2.spectral.j(w0))
    eta = 1 - w0 / (w0 + Om) if p == 1 else Om / w0
    return OttoCycle(
        p=p, omega_high=max(wb, w0), omega_low=min(wb, w0),
        N_A=NA, N_B=NB, N_C=NB, N_D=NA,
        Q1=wb * dN, Q2=-w0 * dN, W=-p * Om * dN,
        tau1=4 * w0 / j1 if j1 else math.inf,
        tau2=4 * w0 / j2 if j2 else math.inf,
        tau_is=1.0 / w0, eta=eta)


def otto_engine_condition(p: int, cfg: EngineConfig):
    """Temperature criterion for the cycle to deliver work."""
    w0, Om = cfg.omega0, cfg.Omega
    T1, T2 = cfg.bath1.temperature, cfg.bath2.temperature
    if p == 1:
        return T1 > (w0 + Om) / w0 * T2
    return T1 < (w0 - Om) / w0 * T2


# -- no-engine certificate ----------------------------------------------------

class Certificate(NamedTuple):
    f_s: float
    g: float
    engine_possible: bool
    excluded: bool


def _log_abs_expm1(x):
    if x > 0:
        return x + math.log(-math.expm1(-x))
    return math.log(-math.expm1(x))


def no_engine_certificate(s, Omega, T1, omega0=1.0) -> Certificate:
    """Compare f_s = |(w0+Om)/(w0-Om)|^s with g = |n_B((w0-Om)/T1) / n_B((w0+Om)/T1)|.

    With T2 -> 0 a power-law bath 1 can only drive an engine if f_s > g.
    Comparison is made on logarithms so extreme temperatures do not overflow.
    """
    if not (s > 0 and Omega > 0 and T1 > 0):
        raise ValueError("need s, Omega, T1 > 0")
    if Omega == omega0:
        return Certificate(math.inf, math.inf, False, True)
    log_f = s * (math.log(omega0 + Omega) - math.log(abs(omega0 - Omega)))
    a, b = (omega0 - Omega) / T1, (omega0 + Omega) / T1
    log_g = _log_abs_expm1(b) - _log_abs_expm1(a)
    f_s = math.exp(log_f) if log_f < 700 else math.inf
    g = math.exp(log_g) if log_g < 700 else math.inf
    return Certificate(f_s, g, log_f > log_g, False)
