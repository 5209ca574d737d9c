import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonon_chill import cooling
from phonon_chill.lindblad import mean_phonon, steady_state
from phonon_chill.operators import HilbertSpace
from phonon_chill.schemes import (
    asymmetric,
    bare_hamiltonian,
    dark_state,
    dissipators,
    stark_baseline,
    symmetric,
)
from phonon_chill.spectrum import coefficients

TWO_PI = 2 * math.pi


def test_thermal_occupation_values():
    assert cooling.thermal_occupation(TWO_PI * 5e5, 0.0) == 0.0
    assert cooling.thermal_occupation(TWO_PI * 5e5, 300.0) == pytest.approx(1.25e7, rel=2e-3)
    assert cooling.thermal_occupation(TWO_PI * 8e6, 0.02) == pytest.approx(51.6, rel=2e-3)
    with pytest.raises(ValueError):
        cooling.thermal_occupation(TWO_PI * 5e5, -1.0)
    with pytest.raises(ValueError):
        cooling.thermal_occupation(0.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e4, 1e9), st.floats(1e-4, 1e3), st.floats(1.01, 3.0))
def test_thermal_occupation_monotone(omega, temp, factor):
    n = cooling.thermal_occupation(omega, temp)
    assert cooling.thermal_occupation(omega, temp * factor) > n
    assert cooling.thermal_occupation(omega * factor, temp) < n


def test_rate_equation_examples():
    assert cooling.rate_equation_nss(0.0, 1e-3, 5.0, 0.0) == 0.0
    assert cooling.rate_equation_nss(1.0, 3.0, 0.0, 0.0) == pytest.approx(0.5)
    # symmetric feasibility chain: A- = 2 Gamma lam^2 / Omega^2, bath heating N gamma_k
    lam, gam, om = 0.1, 30.0, 3.0
    n_bath = cooling.thermal_occupation(TWO_PI * 5e5, 300.0)
    n = cooling.rate_equation_nss(0.0, 2 * gam * lam**2 / om**2, n_bath, 1e-10)
    assert n == pytest.approx(0.019, rel=0.03)
    with pytest.raises(cooling.HeatingDominatedError):
        cooling.rate_equation_nss(2.0, 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        cooling.rate_equation_nss(0.0, 1.0, 0.0, -1.0)


def test_rate_equation_solution():
    t = np.linspace(0, 100, 5)
    n = cooling.rate_equation_n(t, 1.0, 0.01, 0.05, 2.0, 0.01)
    n_ss = (0.01 + 0.02) / 0.05
    assert np.allclose(n, n_ss + (1 - n_ss) * np.exp(-0.05 * t))


def test_fit_decay_synthetic():
    t = np.linspace(0, 50, 201)
    w, resid, window = cooling.fit_decay(t, 0.02 + 1.3 * np.exp(-0.2 * t), 0.02)
    assert w == pytest.approx(0.2, rel=1e-6)
    assert resid < 1e-8
    assert window[0] > 0
    _, resid, _ = cooling.fit_decay(t, 1.0 - t / 60, 0.0)
    assert resid > 0.0


def test_initial_state():
    cfg = asymmetric(0.05, 2.0, 7.5, fock_dim=6)
    sp = HilbertSpace(6)
    rho = cooling.initial_state(cfg, sp, 1.0)
    rho.check()
    internal = rho.rho.reshape(4, 6, 4, 6).trace(axis1=1, axis2=3)
    d = dark_state(cfg)
    assert np.real(d.conj() @ internal @ d) > 0.999
    with pytest.raises(ValueError):
        cooling.cooling_trajectory(cfg, n0=3.0, t_final=1.0)


def test_decoupled_trajectory_is_flat():
    res = cooling.cooling_trajectory(asymmetric(0.0, 2.0, 5.0, fock_dim=6), n0=1.0, t_final=100.0, n_samples=21)
    assert res.fitted_w == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(res.trajectory.n - res.trajectory.n[0])) <= 1e-8


@pytest.mark.parametrize("cfg,t_final", [
    (symmetric(0.05, 1.5, 7.5, fock_dim=6), 800.0),
    (asymmetric(0.05, 2.0, 7.5, fock_dim=6), 3000.0),
])
def test_fitted_rate_matches_coefficients(cfg, t_final):
    res = cooling.cooling_trajectory(cfg, n0=1.0, t_final=t_final, n_samples=161)
    w = res.a_minus - res.a_plus
    assert res.fitted_w == pytest.approx(w, rel=0.25)
    assert res.fitted_w > 0 and res.n_ss_dynamic >= 0
    assert res.tail_rise <= 0.05
    assert not res.non_exponential
    tr = res.trajectory
    assert tr.trace_error.max() <= 1e-9 and tr.hermiticity_error.max() <= 1e-9
    assert np.nanmin(tr.min_eigenvalue) >= -1e-8


def test_fitted_rate_scales_with_lambda_squared():
    w = []
    for lam, t in ((0.025, 1200.0), (0.05, 300.0)):
        res = cooling.cooling_trajectory(symmetric(lam, 1.5, 7.5, fock_dim=6), n0=1.0, t_final=t, n_samples=161)
        w.append(res.fitted_w)
    assert w[1] / w[0] == pytest.approx(4.0, rel=0.15)


def test_rate_equation_vs_dynamics_with_bath():
    cfg = symmetric(0.05, 1.5, 7.5, gamma_k=2e-3, n_thermal=2.0, fock_dim=8)
    res = cooling.cooling_trajectory(cfg, n0=1.0, t_final=400.0, n_samples=81)
    assert res.n_ss_dynamic == pytest.approx(res.n_ss_rate_eq, rel=0.30)


def test_fock_truncation_convergence():
    cfg = symmetric(0.05, 1.5, 7.5, gamma_k=2e-3, n_thermal=0.5)
    n = []
    for nf in (5, 10):
        sp = HilbertSpace(nf)
        c = cfg.replace(fock_dim=nf)
        n.append(mean_phonon(steady_state(bare_hamiltonian(c, sp), dissipators(c, sp), sp).rho, sp))
    assert abs(n[1] - n[0]) <= 0.01 * n[1]


@pytest.mark.parametrize("cfg,parameter", [
    (asymmetric(0.05, 2.0, 7.5), "Omega_g"),
    (symmetric(0.05, 1.5, 7.5), "Delta_g"),
])
def test_gate_point_is_local_minimum(cfg, parameter):
    n0 = cooling.scheme_nss(cfg)
    for dev in (-0.01, 0.01):
        assert cooling.scheme_nss(cooling.perturbed(cfg, parameter, dev)) > n0


@pytest.mark.parametrize("cfg,parameter", [
    (asymmetric(0.05, 2.0, 7.5), "Omega_g"),
    (symmetric(0.05, 1.5, 7.5), "Delta_g"),
])
def test_robustness_second_order(cfg, parameter):
    mags = np.geomspace(0.005, 0.05, 6)
    rep = cooling.robustness_scan(cfg, parameter, np.concatenate([-mags[::-1], mags]))
    assert rep.slope == pytest.approx(2.0, abs=0.2)
    assert rep.slope_negative == pytest.approx(2.0, abs=0.2)
    assert rep.slope_positive == pytest.approx(2.0, abs=0.2)
    assert len(rep.rows()) == 12


def test_robustness_input_checks():
    cfg = asymmetric(0.05, 2.0, 7.5)
    with pytest.raises(ValueError):
        cooling.robustness_scan(cfg, "Omega_g", [0.2])
    with pytest.raises(ValueError):
        cooling.robustness_scan(cfg, "Gamma", [0.01])
    with pytest.raises(ValueError):
        cooling.robustness_scan(cfg, "Delta_g", [0.01])


def test_joint_robustness_product_form():
    cfg = asymmetric(0.05, 2.0, 7.5)
    mags = np.geomspace(0.005, 0.05, 5)
    rep = cooling.joint_robustness(cfg, "Omega_g", mags, mags)
    p, q = rep.exponents
    assert p == pytest.approx(1.0, abs=0.3)
    assert q == pytest.approx(2.0, abs=0.3)


def test_tuned_stark_baseline_cools():
    cfg = cooling.tune_stark_baseline(0.05, 1.5, 7.5, t_horizon=2e4)
    ap, am = coefficients(cfg)
    assert am > ap
    assert 0.25 <= cfg.Omega_g <= 2.0 and -3.0 <= cfg.Delta <= 3.0
    assert cfg.Delta_g == -1.0


def test_compare_schemes_rows():
    base = symmetric(0.05, 1.5, 7.5, fock_dim=5)
    cfgs = [base, base, stark_baseline(0.05, 1.5, 7.5, fock_dim=5), base.replace(fock_dim=2)]
    rows = cooling.compare_schemes(cfgs, t_final=50.0, n0=1.0, n_samples=11)
    assert [r.index for r in rows] == [0, 1, 2, 3]
    assert rows[0].n_final == rows[1].n_final and rows[0].fitted_w == rows[1].fitted_w
    assert rows[3].error is not None and rows[3].rank is None
    ranks = sorted(r.rank for r in rows[:3])
    assert ranks == [1, 2, 3]
    assert rows[0].rank < rows[1].rank  # ties broken by input order
    with pytest.raises(ValueError):
        cooling.compare_schemes([base, base.replace(gamma_k=1e-3)], t_final=1.0)
