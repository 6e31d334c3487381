"""Asymptotic non-Markovianity of the damped oscillator's dynamical map.

The long-time master-equation coefficients at weak coupling are

    Gamma = J(w0) / 2w0,   Delta = Gamma coth(w0 / 2T),
    Pi    = -PV int_0^wc dw J(w) coth(w / 2T) / (pi (w^2 - w0^2))

and the map fails to be divisible by

    N_p = (1 - Delta / sqrt(Delta^2 + Gamma^2 + Pi^2)) / 2  in [0, 1/2].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import NumericsError, QuadratureSpec, integrate_pv
from .spectral import BathConfig, Ohmic, PowerLaw

NM_QUAD = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)


@dataclass(frozen=True)
class NMCoefficients:
    Gamma: float
    Delta: float
    Pi: float
    N_p: float


def _cutoff(bath: BathConfig, cutoff):
    sd = bath.spectral
    if cutoff is not None:
        return float(cutoff)
    if isinstance(sd, PowerLaw):
        return sd.omega_c
    if isinstance(sd, Ohmic):
        raise ValueError("an Ohmic bath needs an explicit cutoff: the PV integral diverges")
    return math.inf


def nm_coefficients(bath: BathConfig, omega0: float = 1.0, cutoff=None,
                    spec: QuadratureSpec = NM_QUAD) -> NMCoefficients:
    T = bath.temperature
    if not T > 0:
        raise ValueError("temperature must be positive")
    sd = bath.spectral
    wc = _cutoff(bath, cutoff)
    if not wc > omega0:
        raise ValueError("cutoff must exceed omega0")
    Gamma = float(sd.j(omega0)) / (2 * omega0)
    Delta = Gamma / math.tanh(omega0 / (2 * T))

    def f(w):
        return sd.j_coth(w, T) / np.pi

    pts = [p for p in (T, 10 * T, *sd.feature_frequencies) if 0 < p < wc and p != omega0]
    # a few decades of breakpoints keep wide domains well resolved
    if math.isfinite(wc):
        pts += list(np.geomspace(2 * omega0, wc, 12)[:-1])
    Pi = -float(integrate_pv(f, omega0, spec, lower=0.0, upper=wc,
                             points=pts, scale=max(omega0, sd.scale)))
    root = math.sqrt(Delta ** 2 + Gamma ** 2 + Pi ** 2)
    N_p = 0.5 * (1.0 - Delta / root) if root > 0 else 0.0
    return NMCoefficients(Gamma, Delta, Pi, N_p)


def nm_scan(make_bath, axes: dict, omega0: float = 1.0, cutoff=None):
    """Evaluate N_p on the product grid of ``axes`` (name -> values).

    ``make_bath(**point)`` builds the BathConfig for each grid point. Rows are
    emitted in row-major axis order; failing points carry ``error`` instead
    of coefficients and do not stop the scan.
    """
    names = list(axes)
    rows = []
    for values in itertools.product(*(axes[n] for n in names)):
        point = dict(zip(names, (float(v) for v in values)))
        row = dict(point)
        try:
            c = nm_coefficients(make_bath(**point), omega0, cutoff)
            row.update(asdict(c), error="")
        except (NumericsError, ValueError) as exc:
            row.update(Gamma=math.nan, Delta=math.nan, Pi=math.nan, N_p=math.nan,
                       error=str(exc))
        rows.append(row)
    return rows
