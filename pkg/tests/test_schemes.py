import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonon_chill.lindblad import steady_state
from phonon_chill.operators import HilbertSpace, annihilation, hermiticity_error, kron
from phonon_chill.schemes import (
    A2, MINUS, PLUS, ZERO,
    ConfigError,
    SchemeConfig,
    SchemeKind,
    analytic_gate_residual,
    ansatz_steady_state,
    asymmetric,
    asymmetric_residual_coupling,
    bare_hamiltonian,
    dark_state,
    dissipators,
    dressed_basis,
    effective_hamiltonian,
    eit_baseline,
    gate_point_residual,
    internal_hamiltonian,
    leakage_remainder,
    sigma_z,
    stark_baseline,
    symmetric,
    to_dressed,
)
from phonon_chill.spectrum import coefficients

S2, S3, S6 = np.sqrt(2), np.sqrt(3), np.sqrt(6)

params = st.tuples(
    st.floats(0.0, 0.1), st.floats(0.5, 10.0), st.floats(1.0, 50.0), st.floats(0.2, 3.0)
)


def test_config_validation():
    cfg = asymmetric(0.05, 2.0, 5.0)
    assert cfg.eta == cfg.lam / cfg.omega_k
    assert sum(cfg.branching) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigError):
        asymmetric(-0.1, 2.0, 5.0)
    with pytest.raises(ConfigError):
        asymmetric(0.1, 2.0, 0.0)
    with pytest.raises(ConfigError):
        asymmetric(0.1, 2.0, 5.0, branching=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        symmetric(0.1, 2.0, 5.0, fock_dim=1)
    with pytest.raises(ConfigError):
        SchemeConfig(kind=SchemeKind.SYMMETRIC, lam=0.1, Gamma=5.0, Omega=2.0, Omega_g=2.0, Delta=-1.0)


def test_config_roundtrip():
    for cfg in (asymmetric(0.05, 2.0, 5.0), symmetric(0.1, 3.0, 30.0, gamma_k=1e-4, n_thermal=3.0),
                eit_baseline(0.02, 5.0, 3.0), stark_baseline(0.02, 5.0, 3.0)):
        assert SchemeConfig.from_dict(cfg.to_dict()) == cfg


def test_dressed_bases():
    asym = dressed_basis(SchemeKind.ASYMMETRIC)
    sym = dressed_basis(SchemeKind.SYMMETRIC)
    for basis in (asym, sym):
        assert np.max(np.abs(basis.u @ basis.u.conj().T - np.eye(4))) <= 1e-12
    assert np.allclose(asym.ket("d"), [0, 1 / S3, 1 / S3, -1 / S3], atol=1e-15)
    assert np.allclose(asym.ket("b"), [0, 1 / S6, 1 / S6, 2 / S6], atol=1e-15)
    assert np.allclose(asym.ket("Y"), [0, 1 / S2, -1 / S2, 0], atol=1e-15)
    assert np.allclose(sym.ket("D"), [0, 1 / S2, 0, -1 / S2], atol=1e-15)
    assert np.allclose(sym.ket("B"), [0, 1 / S2, 0, 1 / S2], atol=1e-15)
    d, b, y = asym.ket("d"), asym.ket("b"), asym.ket("Y")
    for u, v in ((d, b), (d, y), (b, y)):
        assert abs(np.vdot(u, v)) <= 1e-15


def test_sigma_z_dressed_elements():
    asym = dressed_basis(SchemeKind.ASYMMETRIC)
    sym = dressed_basis(SchemeKind.SYMMETRIC)
    sz = sigma_z()
    assert np.vdot(asym.ket("d"), sz @ asym.ket("b")) == pytest.approx(1 / S2, abs=1e-15)
    assert np.vdot(asym.ket("d"), sz @ asym.ket("Y")) == pytest.approx(1 / S6, abs=1e-15)
    assert np.vdot(sym.ket("B"), sz @ sym.ket("D")) == pytest.approx(1.0, abs=1e-15)
    # brute-force table against the residual coupling pattern
    t = to_dressed(sz, asym)
    labels = list(asym.labels)
    i = {k: labels.index(k) for k in labels}
    assert t[i["Y"], i["Y"]] == pytest.approx(0.5, abs=1e-15)
    assert t[i["b"], i["b"]] == pytest.approx(-0.5, abs=1e-15)
    assert t[i["d"], i["d"]] == pytest.approx(0.0, abs=1e-15)
    assert t[i["b"], i["Y"]] == pytest.approx(1 / np.sqrt(12), abs=1e-15)


def test_dark_states():
    assert np.allclose(dark_state(asymmetric(0.05, 2.0, 5.0)), [0, 1 / S3, 1 / S3, -1 / S3], atol=1e-15)
    assert np.allclose(dark_state(symmetric(0.05, 2.0, 5.0)), [0, 1 / S2, 0, -1 / S2], atol=1e-15)
    with pytest.raises(ConfigError):
        dark_state(eit_baseline(0.05, 2.0, 5.0))


@settings(max_examples=40, deadline=None)
@given(params)
def test_drive_annihilates_dark_state(p):
    lam, om, gam, og = p
    cfg = asymmetric(lam, om, gam, Omega_g=og, Delta_minus=om)
    h = internal_hamiltonian(cfg)
    assert np.linalg.norm(h @ dark_state(cfg)) <= 1e-12 * np.abs(h).max()
    sym = symmetric(lam, om, gam, Omega_g=og, Delta_g=-og / 3, Delta=om)
    h = internal_hamiltonian(sym)
    # |D> is an eigenvector with eigenvalue 0 of the internal drive block
    assert np.linalg.norm(h @ dark_state(sym)) <= 1e-12 * np.abs(h).max()


@settings(max_examples=40, deadline=None)
@given(params, st.sampled_from([2, 3, 5]))
def test_hamiltonians_hermitian(p, n_f):
    lam, om, gam, og = p
    sp = HilbertSpace(n_f)
    for cfg in (asymmetric(lam, om, gam, Omega_g=og), symmetric(lam, om, gam, Omega_g=og),
                eit_baseline(lam, om, gam), stark_baseline(lam, om, gam, Omega_g=og)):
        assert hermiticity_error(bare_hamiltonian(cfg, sp)) <= 1e-12
    for cfg in (asymmetric(lam, om, gam, Omega_g=og), symmetric(lam, om, gam, Omega_g=og)):
        assert hermiticity_error(effective_hamiltonian(cfg, sp)) <= 1e-12


def test_bare_hamiltonian_explicit_terms():
    sp = HilbertSpace(3)
    cfg = symmetric(0.1, 2.0, 5.0, Omega_g=1.5, Delta_g=-0.7, Delta=0.3)
    h = bare_hamiltonian(cfg, sp)
    a = annihilation(3)
    e = np.eye(4)

    def ket_bra(i, j):
        return np.outer(e[i], e[j])

    ref = kron(np.eye(4), a.conj().T @ a)
    internal = (-0.3 * ket_bra(A2, A2) - 0.7 * ket_bra(ZERO, ZERO)
                + 1.0 * (ket_bra(A2, PLUS) + ket_bra(A2, MINUS))
                + 0.75 * (ket_bra(PLUS, ZERO) + ket_bra(MINUS, ZERO)))
    internal = internal + internal.conj().T - np.diag(np.diag(internal))
    ref = ref + kron(internal, np.eye(3)) + 0.1 * kron(ket_bra(PLUS, PLUS) - ket_bra(MINUS, MINUS), a + a.conj().T)
    assert np.max(np.abs(h - ref)) <= 1e-15


def test_asymmetric_dark_eigenvector_at_zero_coupling():
    cfg = asymmetric(0.0, 3.0, 5.0)
    sp = HilbertSpace(2)
    h = bare_hamiltonian(cfg, sp)
    psi = np.kron(dark_state(cfg), [1.0, 0.0])
    assert np.linalg.norm(h @ psi) <= 1e-12


def test_asymmetric_ground_energies():
    # dressed diagonal: |d>, |b> at zero, |Y> at -Omega_g
    cfg = asymmetric(0.0, 3.0, 5.0, Omega_g=1.1)
    t = to_dressed(internal_hamiltonian(cfg), dressed_basis(SchemeKind.ASYMMETRIC))
    labels = dressed_basis(SchemeKind.ASYMMETRIC).labels
    diag = dict(zip(labels, np.real(np.diag(t))))
    assert diag["d"] == pytest.approx(0.0, abs=1e-14)
    assert diag["b"] == pytest.approx(0.0, abs=1e-14)
    assert diag["Y"] == pytest.approx(-1.1, abs=1e-14)


def test_effective_vs_bare():
    sp = HilbertSpace(4)
    sym = symmetric(0.07, 2.0, 5.0, Omega_g=1.7, Delta_g=-0.6, Delta=0.4)
    assert np.max(np.abs(effective_hamiltonian(sym, sp) - bare_hamiltonian(sym, sp))) <= 1e-12
    asym = asymmetric(0.07, 2.0, 5.0)
    diff = bare_hamiltonian(asym, sp) - effective_hamiltonian(asym, sp)
    basis = dressed_basis(SchemeKind.ASYMMETRIC)
    b, y = basis.ket("b"), basis.ket("Y")
    a = annihilation(4)
    pattern = 0.5 * (np.outer(y, y) - np.outer(b, b)) + (np.outer(b, y) + np.outer(y, b)) / np.sqrt(12)
    expected = 0.07 * kron(pattern, a + a.conj().T)
    assert np.max(np.abs(diff - expected)) <= 1e-12
    assert np.max(np.abs(asymmetric_residual_coupling(asym, sp) - expected)) <= 1e-12
    with pytest.raises(ConfigError):
        effective_hamiltonian(eit_baseline(0.05, 2.0, 5.0), sp)


def test_dissipators_structure():
    sp = HilbertSpace(4)
    base = asymmetric(0.05, 2.0, 5.0)
    d = dissipators(base, sp)
    assert len(d) == 3
    assert sum(r for r, _ in d) == pytest.approx(5.0, abs=1e-12)
    d = dissipators(base.replace(gamma_k=1e-3), sp)
    assert len(d) == 4
    d = dissipators(base.replace(gamma_k=1e-3, n_thermal=2.0), sp)
    assert len(d) == 5
    assert d[3][0] == pytest.approx(3e-3) and d[4][0] == pytest.approx(2e-3)
    for k, (_, o) in enumerate(d):
        blocks = o.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3)
        nz = [(i, j) for i in range(4) for j in range(4) if np.any(blocks[i, j])]
        if k < 3:
            # |i><A2| (x) identity: a single block in the A2 column
            assert len(nz) == 1 and nz[0][1] == A2
        else:
            # b or b^dag on every internal level: one off-diagonal band
            assert all(i == j for i, j in nz)
            sub = blocks[0, 0]
            band = 1 if k == 3 else -1
            assert np.array_equal(sub, np.diag(np.diag(sub, band), band))


def test_baseline_masks():
    e = eit_baseline(0.05, 2.0, 5.0)
    s = stark_baseline(0.05, 2.0, 5.0)
    assert set(e.active_levels) == {A2, PLUS, MINUS}
    assert set(s.active_levels) == {A2, PLUS, ZERO}
    h = internal_hamiltonian(e)
    assert np.all(h[ZERO] == 0) and np.all(h[:, ZERO] == 0)
    assert dict(zip((PLUS, ZERO, MINUS), e.branching))[ZERO] == 0


def test_ansatz_limits_and_ratio():
    sp = HilbertSpace(3)
    for cfg in (asymmetric(0.0, 2.0, 5.0), symmetric(0.0, 2.0, 5.0)):
        psi = ansatz_steady_state(cfg, sp)
        assert np.allclose(psi, np.kron(dark_state(cfg), [1, 0, 0]), atol=1e-15)
    cfg = asymmetric(0.1, 2.0, 5.0)
    psi = ansatz_steady_state(cfg, sp).reshape(4, 3)
    basis = dressed_basis(SchemeKind.ASYMMETRIC)
    one = psi[:, 1]
    ratio = np.vdot(basis.ket("b"), one) / np.vdot(basis.ket("Y"), one)
    assert ratio == pytest.approx(-1 / S3, abs=1e-14)
    assert np.linalg.norm(ansatz_steady_state(cfg, sp)) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        ansatz_steady_state(symmetric(0.1, 2.0, 5.0).replace(Omega_g=0.0, enforce_dark=False), sp)


@pytest.mark.parametrize("cfg", [asymmetric(0.02, 2.0, 15.0), asymmetric(0.05, 3.0, 15.0),
                                 symmetric(0.02, 2.0, 15.0), symmetric(0.05, 3.0, 15.0)])
def test_ansatz_fidelity_with_steady_state(cfg):
    sp = HilbertSpace(6)
    rho = steady_state(bare_hamiltonian(cfg, sp), dissipators(cfg, sp), sp).rho
    psi = ansatz_steady_state(cfg, sp)
    assert np.real(psi.conj() @ rho @ psi) >= 1 - 5 * cfg.eta**2


def test_gate_point_residual_values():
    assert abs(gate_point_residual(asymmetric(0.05, 2.0, 5.0))) <= 1e-12
    assert abs(gate_point_residual(symmetric(0.05, 2.0, 5.0))) <= 1e-12
    off = asymmetric(0.05, 2.0, 5.0, Omega_g=1.0)
    assert gate_point_residual(off) == pytest.approx(np.sqrt(1.5) * 0.05 / 3, rel=1e-12)
    assert gate_point_residual(off) == pytest.approx(0.02041, abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(params, st.floats(-2.0, 0.5))
def test_gate_residual_matches_formula(p, dg):
    lam, om, gam, og = p
    for cfg in (asymmetric(lam, om, gam, Omega_g=og), symmetric(lam, om, gam, Omega_g=og, Delta_g=dg)):
        assert gate_point_residual(cfg) == pytest.approx(analytic_gate_residual(cfg), rel=1e-10, abs=1e-13)


def test_leakage_remainder_scaling():
    # only the exact (bare) coupling leaves a non-leading remainder
    r1 = leakage_remainder(asymmetric(0.04, 2.0, 5.0), "bare")
    r2 = leakage_remainder(asymmetric(0.02, 2.0, 5.0), "bare")
    assert r1 / r2 >= 3.5
    assert leakage_remainder(asymmetric(0.04, 2.0, 5.0), "effective") <= 1e-15
    assert leakage_remainder(symmetric(0.04, 2.0, 5.0), "bare") <= 1e-15
