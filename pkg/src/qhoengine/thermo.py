"""Cycle-averaged power and heat currents at arbitrary coupling.

All pieces are frequency integrals of bilinears in the Floquet coefficients,
evaluated together on one adaptive quadrature (see ``numerics``). The heat
current from bath 1 is obtained twice: from the energy balance
``J1 = -(P + J2)`` and directly as the work done by the bath-1 force on the
modulated coordinate; the mismatch is the reported balance residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .floquet import (DEFAULT_M, KernelSet, build_kernels, converge_truncation,
                      probe_frequencies, solve_floquet_batch)
from .numerics import DEFAULT_QUAD, NumericsError, QuadratureSpec, integrate_with_error
from .spectral import BathConfig, Lorentzian, Ohmic


class IntegrityError(NumericsError):
    """First-law residual too large: quadrature or truncation is off."""


BALANCE_TOL = 1e-6
REGIMES = ("engine", "refrigerator-candidate", "heater", "dissipator")


@dataclass(frozen=True)
class EngineConfig:
    Omega: float
    bath1: BathConfig
    bath2: BathConfig
    omega0: float = 1.0
    quad: QuadratureSpec = field(default=DEFAULT_QUAD)
    M: int | None = None  # None: converge automatically from DEFAULT_M

    def __post_init__(self):
        if not self.Omega > 0:
            raise ValueError("Omega must be positive")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.M is not None and self.M < 0:
            raise ValueError("truncation order must be non-negative")

    @classmethod
    def lorentzian(cls, Omega, omega1, kappa, T1, T2, gamma1=0.02, gamma2=0.02, **kw):
        """Structured bath 1 (Lorentzian, coupling kappa) and Ohmic bath 2."""
        omega0 = kw.get("omega0", 1.0)
        b1 = BathConfig(Lorentzian.from_kappa(kappa, gamma1, omega1, omega0), T1)
        b2 = BathConfig(Ohmic(gamma2), T2)
        return cls(Omega, b1, b2, **kw)

    @property
    def kappa(self):
        sd = self.bath1.spectral
        return sd.kappa(self.omega0) if isinstance(sd, Lorentzian) else None

    @property
    def gamma2(self):
        return float(self.bath2.spectral.j_over_w(self.omega0))

    @property
    def scale(self):
        return max(self.omega0, self.Omega, self.bath1.spectral.scale,
                   self.bath1.temperature, self.bath2.temperature)

    @property
    def omega_max(self):
        return self.quad.omega_max or 50.0 * self.scale

    def kernels(self) -> KernelSet:
        return build_kernels(self.omega0, self.Omega, self.bath1, self.bath2)


@dataclass
class ThermoReport:
    P: float
    P_a: float
    P_b1: float
    P_b2: float
    J1: float
    J2: float
    J2_a: float
    J2_b: float
    J1_direct: float
    balance_residual: float
    balance_scale: float
    eta: float
    eta_C: float
    eta_1: float
    eta_2: float
    regime: str
    M: int
    gamma2: float

    @property
    def P_over_gamma2sq(self):
        return self.P / self.gamma2 ** 2

    @property
    def eta_over_etaC(self):
        if not (self.eta_C > 0) or math.isnan(self.eta):
            return math.nan
        return self.eta / self.eta_C


# component order of the stacked integrand
_COMPONENTS = ("P_a", "P_b1", "P_b2", "J2", "J2_a", "J1_direct")


class _Integrand:
    """Every thermodynamic integrand on a batch of noise frequencies.

    A unit noise component e^{-iwt} of bath nu drives x(t) into harmonics
    w + k Om with amplitudes built from the Floquet coefficients. Cycle
    averages of bilinears then reduce to sums over k weighted by the
    symmetrised noise spectrum J_nu(w) coth(w / 2T_nu):

        P  = -<dg1/dt x X1>,   J1 = <d(g1 x)/dt X1>,   J2 = <dx/dt F2>

    with X1, F2 the bath forces (noise minus memory-friction response).
    P^(a) is the noise part of the bath-1 source, P^(b,1) its response
    part and P^(b,2) the bath-2 source.
    """

    def __init__(self, cfg: EngineConfig, M: int):
        self.cfg = cfg
        self.k = cfg.kernels()
        self.M = M
        self.K = 2 * M + 3
        self.ks = np.arange(-self.K, self.K + 1)
        self.sd1 = cfg.bath1.spectral
        self.sd2 = cfg.bath2.spectral
        self.T1 = cfg.bath1.temperature
        self.T2 = cfg.bath2.temperature
        self.wmax = cfg.omega_max

    def _full(self, w):
        """G_k(w) on the harmonic axis k = -K..K (zero for odd or truncated k)."""
        sol = solve_floquet_batch(self.k, w, self.M)
        out = np.zeros((len(w), 2 * self.K + 1), dtype=complex)
        K, M = self.K, self.M
        out[:, K - 2 * M:K + 2 * M + 1:2] = sol.values
        return out

    @staticmethod
    def _up(a):
        # a[k + 1] placed at k
        out = np.zeros_like(a)
        out[:, :-1] = a[:, 1:]
        return out

    @staticmethod
    def _down(a):
        # a[k - 1] placed at k
        out = np.zeros_like(a)
        out[:, 1:] = a[:, :-1]
        return out

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        Om, K = self.cfg.Omega, self.K
        freq = w[:, None] + self.ks * Om
        gt1 = self.sd1.gamma_tilde(freq)
        gt2 = self.sd2.gamma_tilde(freq)
        G0 = self._full(w)
        x_src = {
            1: 0.5 * (self._up(self._full(w - Om)) + self._down(self._full(w + Om))),
            2: G0,
        }
        S = {1: self.sd1.j_coth(w, self.T1), 2: self.sd2.j_coth(w, self.T2)}

        out = np.zeros((len(w), len(_COMPONENTS)))
        tot = lambda a, b: np.sum((a * np.conj(b)).real, axis=1)
        for src, x in x_src.items():
            xd = -1j * freq * x
            y = 0.5 * (self._up(x) + self._down(x))         # g1 x
            yd = -1j * freq * y
            gx = 0.5j * Om * (self._up(x) - self._down(x))  # (dg1/dt) x
            X1 = -gt1 * yd
            F2 = -gt2 * xd
            s = S[src] / (2 * np.pi)
            if src == 1:
                out[:, 0] = -s * gx[:, K].real
                out[:, 1] = -s * tot(gx, X1)
                out[:, 3] += s * tot(xd, F2)
                out[:, 5] += s * (yd[:, K].real + tot(yd, X1))
            else:
                out[:, 2] = -s * tot(gx, X1)
                j2a = s * xd[:, K].real
                out[:, 3] += j2a + s * tot(xd, F2)
                out[:, 4] = np.where(np.abs(w) <= self.wmax, j2a, 0.0)
                out[:, 5] += s * tot(yd, X1)
        return out

    def breakpoints(self):
        Om, M = self.cfg.Omega, self.M
        feats = [0.0] + list(self.k.features())
        shifts = np.arange(-2 * M - 3, 2 * M + 4) * Om
        pts = np.add.outer(np.array(feats), shifts).ravel()
        pts = np.concatenate([pts, -pts, [self.wmax, -self.wmax]])
        return np.unique(np.round(pts, 14))


def choose_truncation(cfg: EngineConfig, tol: float = 1e-12) -> int:
    if cfg.M is not None:
        return cfg.M
    k = cfg.kernels()
    M, _ = converge_truncation(k, probe_frequencies(k), tol=tol, M_start=DEFAULT_M)
    return M


def integrate_all(cfg: EngineConfig, M: int | None = None):
    """All integrand components as a dict, plus the truncation used."""
    M = choose_truncation(cfg) if M is None else M
    integrand = _Integrand(cfg, M)
    # Tails decay algebraically; the tangent map carries them to infinity.
    val, err = integrate_with_error(integrand, -np.inf, np.inf, cfg.quad,
                                    integrand.breakpoints(), scale=cfg.scale, n_init=64)
    return dict(zip(_COMPONENTS, val)), dict(zip(_COMPONENTS, err)), M


def power_a(cfg: EngineConfig, M=None):
    return integrate_all(cfg, M)[0]["P_a"]


def power_b1(cfg: EngineConfig, M=None):
    return integrate_all(cfg, M)[0]["P_b1"]


def power_b2(cfg: EngineConfig, M=None):
    return integrate_all(cfg, M)[0]["P_b2"]


def heat_current_2(cfg: EngineConfig, M=None):
    """(J2, J2^(a), J2^(b)); the pieces use the hard cutoff ``cfg.omega_max``."""
    v = integrate_all(cfg, M)[0]
    return v["J2"], v["J2_a"], v["J2"] - v["J2_a"]


def classify(P, J1, J2, T1, T2, floor=0.0):
    """Operating regime; magnitudes at or below ``floor`` count as zero."""
    P, J1, J2 = (0.0 if abs(v) <= floor else v for v in (P, J1, J2))
    if P < 0:
        return "engine"
    if J1 < 0 and J2 < 0:
        return "heater"
    if T1 != T2:
        j_cold = J1 if T1 < T2 else J2
        if j_cold > 0:
            return "refrigerator-candidate"
    return "dissipator"


def efficiencies(P, J1, J2, T1, T2):
    """(eta, eta_C, -P/J1, -P/J2); eta uses the hotter bath's inflow."""
    with np.errstate(divide="ignore", invalid="ignore"):
        eta1 = -P / J1 if J1 != 0 else math.nan
        eta2 = -P / J2 if J2 != 0 else math.nan
    if T1 == T2:
        return math.nan, 0.0, eta1, eta2
    hot_J = J1 if T1 > T2 else J2
    eta_C = 1.0 - min(T1, T2) / max(T1, T2)
    eta = -P / hot_J if (P < 0 and hot_J > 0) else math.nan
    return eta, eta_C, eta1, eta2


def full_report(cfg: EngineConfig, strict: bool = True) -> ThermoReport:
    """Assemble every piece; raise IntegrityError if the first law fails."""
    v, _, M = integrate_all(cfg)
    P = v["P_a"] + v["P_b1"] + v["P_b2"]
    J2 = v["J2"]
    J1 = -(P + J2)
    resid = abs(P + v["J1_direct"] + J2)
    g2 = cfg.gamma2
    scale = max(abs(P), abs(J1), abs(J2), cfg.omega0 * g2 ** 2)
    if strict and resid > BALANCE_TOL * scale:
        raise IntegrityError(
            f"energy balance violated: |P+J1+J2| = {resid:.3g} (scale {scale:.3g}, M={M})")
    T1, T2 = cfg.bath1.temperature, cfg.bath2.temperature
    eta, eta_C, eta1, eta2 = efficiencies(P, J1, J2, T1, T2)
    return ThermoReport(
        P=P, P_a=v["P_a"], P_b1=v["P_b1"], P_b2=v["P_b2"], J1=J1, J2=J2,
        J2_a=v["J2_a"], J2_b=J2 - v["J2_a"], J1_direct=v["J1_direct"],
        balance_residual=resid, balance_scale=scale, eta=eta, eta_C=eta_C,
        eta_1=eta1, eta_2=eta2, regime=classify(P, J1, J2, T1, T2, cfg.quad.abs_tol), M=M, gamma2=g2)


def with_kappa(cfg: EngineConfig, kappa: float) -> EngineConfig:
    sd = cfg.bath1.spectral
    if not isinstance(sd, Lorentzian):
        raise TypeError("kappa only applies to a Lorentzian bath 1")
    b1 = BathConfig(Lorentzian.from_kappa(kappa, sd.gamma1, sd.omega1, cfg.omega0),
                    cfg.bath1.temperature)
    return replace(cfg, bath1=b1)
