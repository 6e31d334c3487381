import math

import numpy as np
import pytest

from oracles import bilinear_heat_current
from qhoengine.spectral import BathConfig, Ohmic
from qhoengine.thermo import (EngineConfig, IntegrityError, classify, efficiencies,
                              full_report, heat_current_2, integrate_all, power_a,
                              power_b1, power_b2, with_kappa)
from qhoengine.weakcoupling import weak_power_pieces

FIG2 = EngineConfig.lorentzian(0.3, 0.7, 1e-3, 0.2, 2.0)


def ohmic_engine(Omega, T1, T2, gamma1=0.02):
    return EngineConfig(Omega, BathConfig(Ohmic(gamma1), T1), BathConfig(Ohmic(0.02), T2))


@pytest.fixture(scope="module")
def fig2_report():
    return full_report(FIG2)


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig.lorentzian(0.0, 0.7, 1e-3, 0.2, 2.0)
    with pytest.raises(ValueError):
        EngineConfig.lorentzian(0.3, 0.7, -1e-3, 0.2, 2.0)
    with pytest.raises(ValueError):
        EngineConfig.lorentzian(0.3, 0.7, 1e-3, -0.2, 2.0)
    with pytest.raises(ValueError):
        EngineConfig.lorentzian(0.3, 0.7, 1e-3, 0.2, 2.0, M=-1)


def test_config_properties():
    assert FIG2.kappa == pytest.approx(1e-3)
    assert FIG2.gamma2 == pytest.approx(0.02)
    assert with_kappa(FIG2, 0.2).kappa == pytest.approx(0.2)
    with pytest.raises(TypeError):
        with_kappa(ohmic_engine(0.3, 1, 1), 0.1)


def test_decomposition_exact(fig2_report):
    r = fig2_report
    assert r.P == r.P_a + r.P_b1 + r.P_b2
    assert r.J2 == pytest.approx(r.J2_a + r.J2_b, rel=1e-15)
    assert r.J1 == -(r.P + r.J2)


def test_piece_accessors_agree_with_report(fig2_report):
    assert power_a(FIG2) == fig2_report.P_a
    assert power_b1(FIG2) == fig2_report.P_b1
    assert power_b2(FIG2) == fig2_report.P_b2
    assert heat_current_2(FIG2) == (fig2_report.J2, fig2_report.J2_a, fig2_report.J2_b)


def test_first_law_direct_current(fig2_report):
    r = fig2_report
    assert abs(r.P + r.J1_direct + r.J2) <= 1e-6 * r.balance_scale


@pytest.mark.parametrize("kappa,T1,T2", [(1e-3, 0.2, 2.0), (0.1, 0.2, 2.0), (0.4, 1.0, 0.3)])
def test_against_unreduced_bilinear_currents(kappa, T1, T2):
    cfg = EngineConfig.lorentzian(0.3, 0.7, kappa, T1, T2)
    r = full_report(cfg)
    J1 = bilinear_heat_current(cfg, 1)
    J2 = bilinear_heat_current(cfg, 2)
    scale = max(abs(J1), abs(J2))
    assert abs(r.J1 - J1) <= 1e-8 * scale
    assert abs(r.J2 - J2) <= 1e-8 * scale
    assert abs(r.P + J1 + J2) <= 1e-8 * scale


def test_zero_coupling_pieces_vanish():
    cfg = EngineConfig.lorentzian(0.3, 0.7, 0.0, 0.2, 2.0)
    v, _, _ = integrate_all(cfg)
    assert v["P_a"] == 0 and v["P_b1"] == 0 and v["P_b2"] == 0


def test_single_bath_equilibrium_no_current():
    cfg = EngineConfig.lorentzian(0.3, 0.7, 0.0, 1.0, 1.0)
    assert abs(full_report(cfg).J2) < 1e-15


def test_equal_temperatures_slow_drive_current_vanishes():
    # no gradient, and the drive power falls off as Omega^2
    J = [abs(full_report(EngineConfig.lorentzian(Om, 0.7, 0.1, 1.0, 1.0)).J2)
         for Om in (0.01, 0.001)]
    assert J[1] < J[0] / 10


@pytest.mark.parametrize("T1", [50.0, 100.0])
def test_markov_power_positive(T1):
    for Om in (0.2, 0.9, 1.7):
        r = full_report(ohmic_engine(Om, T1, 0.5))
        assert r.P >= -1e-8
        assert r.P_b1 >= 0 and r.P_b2 >= 0
        if T1 >= 100:
            assert abs(r.P_a) < 1e-4 * abs(r.P_b1 + r.P_b2)


def test_second_order_piece_scales_quadratically():
    def ratio(kappa):
        v, _, _ = integrate_all(EngineConfig.lorentzian(0.3, 0.7, kappa, 0.2, 2.0))
        return v["P_b1"] / v["P_a"]
    assert ratio(1e-5) / ratio(1e-6) == pytest.approx(10.0, rel=0.05)
    assert abs(ratio(1e-6)) < 1e-3


def test_first_order_pieces_off_resonance():
    cfg = EngineConfig.lorentzian(0.3, 0.5, 1e-3, 0.2, 2.0)
    v, _, _ = integrate_all(cfg)
    _, pb2 = weak_power_pieces(cfg)
    assert v["P_b2"] == pytest.approx(pb2, rel=0.02)


def test_first_order_pieces_on_resonance_small_kappa():
    # on omega1 = omega0 - Omega the first-order form needs kappa << gamma1 gamma2
    cfg = EngineConfig.lorentzian(0.3, 0.7, 4e-5, 0.2, 2.0)
    v, _, _ = integrate_all(cfg)
    pa, pb2 = weak_power_pieces(cfg)
    assert v["P_a"] == pytest.approx(pa, rel=0.02)
    assert v["P_b2"] == pytest.approx(pb2, rel=0.02)


def test_fig2_point(fig2_report):
    r = fig2_report
    assert 0.2 < 0.7 / (0.7 + 0.3) * 2.0
    assert r.regime == "engine" and r.P < 0
    assert r.J2 > 0                          # the hot static bath feeds the engine
    assert r.J1 < 0
    assert r.P_b2 < 0 and abs(r.P_b2) > abs(r.P_a)
    assert 0 < r.eta <= r.eta_C
    assert r.eta == pytest.approx(-r.P / r.J2)
    assert r.P_over_gamma2sq == pytest.approx(r.P / 0.02 ** 2)


def test_broken_truncation_trips_integrity_check():
    cfg = EngineConfig.lorentzian(0.3, 0.7, 0.3, 0.2, 2.0, M=0)
    with pytest.raises(IntegrityError):
        full_report(cfg)
    assert full_report(cfg, strict=False).balance_residual > 1e-6


def test_classify():
    assert classify(-1, 1, 0, 1, 2) == "engine"
    assert classify(1, -0.5, -0.5, 1, 2) == "heater"
    assert classify(1, 0.2, -1.2, 1, 2) == "refrigerator-candidate"
    assert classify(1, -1.2, 0.2, 1, 2) == "dissipator"
    assert classify(1, -1.2, 0.2, 1, 1) == "dissipator"


def test_classify_floor_suppresses_roundoff():
    assert classify(0.0, 5e-19, -5e-19, 1, 2) == "refrigerator-candidate"
    assert classify(0.0, 5e-19, -5e-19, 1, 2, floor=1e-12) == "dissipator"
    assert classify(-2e-12, 1, 1, 1, 2, floor=1e-12) == "engine"


def test_uncoupled_bath_reports_no_regime():
    r = full_report(EngineConfig.lorentzian(0.5, 0.4, 0.0, 0.3, 2.0))
    assert r.regime == "dissipator"


def test_efficiencies():
    eta, eta_C, eta1, eta2 = efficiencies(-1.0, -3.0, 4.0, 0.2, 2.0)
    assert eta == 0.25 and eta_C == pytest.approx(0.9)
    assert eta1 == pytest.approx(-1 / 3) and eta2 == 0.25
    assert math.isnan(efficiencies(1.0, -3.0, 2.0, 0.2, 2.0)[0])
    assert math.isnan(efficiencies(-1.0, 2.0, -1.0, 1.0, 1.0)[0])


def test_carnot_bound_on_engine_points():
    for Om, w1 in [(0.3, 0.7), (0.2, 0.75), (0.45, 0.55)]:
        r = full_report(EngineConfig.lorentzian(Om, w1, 1e-3, 0.2, 2.0))
        if r.regime == "engine":
            assert r.eta_over_etaC <= 1 + 1e-3
