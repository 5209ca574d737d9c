"""Force fluctuation spectrum of the driven internal levels.

    S(w) = int_0^inf dt e^{iwt} <df(t) df(0)>_ss = Tr[ df (-iw - L)^{-1} (df rho_ss) ]

with f = lambda (|+1><+1| - |-1><-1|) and df = f - <f>_ss, evaluated on the
phonon-free internal system.  The heating and cooling coefficients are
A+ = 2 Re S(-omega_k) and A- = 2 Re S(omega_k).  With f in frequency units
no further prefactor is needed: this normalization reproduces the closed-form
heating coefficient and both peak cooling coefficients exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lindblad import liouvillian_matrix, DegenerateSteadyStateError
from .operators import SingularMatrixError, linear_solve, null_vector, kernel_dimension
from .schemes import (
    ConfigError,
    SchemeConfig,
    SchemeKind,
    dressed_basis,
    internal_hamiltonian,
    internal_jumps,
    sigma_x,
    sigma_z,
)

log = logging.getLogger(__name__)

# Global normalization of S; one constant for every configuration.
SPECTRUM_NORMALIZATION = 1.0


class SingularPointError(ArithmeticError):
    pass


@dataclass
class SpectrumResult:
    omega_grid: np.ndarray
    s_values: np.ndarray
    a_plus: float
    a_minus: float
    components: Optional[tuple] = None
    singular: tuple = ()

    def value_at(self, omega: float) -> complex:
        idx = int(np.argmin(np.abs(self.omega_grid - omega)))
        if abs(self.omega_grid[idx] - omega) > 1e-12:
            raise KeyError(f"omega {omega} not on the grid")
        return complex(self.s_values[idx])


def default_grid(omega_k: float = 1.0, lo: float = -2.0, hi: float = 3.0, steps: int = 1001) -> np.ndarray:
    """Uniform grid in units of omega_k with -1, 0, +1 inserted exactly."""
    grid = np.linspace(lo, hi, steps)
    grid = np.union1d(grid, [x for x in (-1.0, 0.0, 1.0) if lo <= x <= hi])
    grid = grid[np.concatenate(([True], np.diff(grid) > 1e-12))]
    for exact in (-1.0, 0.0, 1.0):
        grid[np.abs(grid - exact) < 1e-12] = exact
    return grid * omega_k


def force_operator(cfg: SchemeConfig) -> np.ndarray:
    """f = lambda (|+1><+1| - |-1><-1|) on the internal levels."""
    return cfg.lam * sigma_z()


class InternalModel:
    """Internal-level generator restricted to the levels a scheme actually uses."""

    def __init__(self, cfg: SchemeConfig):
        self.cfg = cfg
        keep = list(cfg.active_levels)
        self.keep = keep
        self.embed = np.eye(4, dtype=complex)[:, keep]
        self.h = self.compress(internal_hamiltonian(cfg))
        self.jumps = [(r, self.compress(o)) for r, o in internal_jumps(cfg)]
        self.dim = len(keep)
        self.lmat = liouvillian_matrix(self.h, self.jumps)
        self.rho_ss = self._steady_state()

    def compress(self, op: np.ndarray) -> np.ndarray:
        return self.embed.conj().T @ op @ self.embed

    def _steady_state(self) -> np.ndarray:
        if kernel_dimension(self.lmat) > 1:
            raise DegenerateSteadyStateError(f"{self.cfg.kind.value}: internal steady state is degenerate")
        v = null_vector(self.lmat).reshape(self.dim, self.dim)
        rho = v / np.trace(v)
        return 0.5 * (rho + rho.conj().T)

    def steady_state4(self) -> np.ndarray:
        return self.embed @ self.rho_ss @ self.embed.conj().T

    def fluct(self, f4: np.ndarray) -> np.ndarray:
        f = self.compress(f4)
        return f - np.trace(f @ self.rho_ss) * np.eye(self.dim)

    def resolvent_apply(self, omega: float, x: np.ndarray) -> np.ndarray:
        """(-i omega - L)^{-1} x, i.e. int_0^inf e^{i omega t} e^{L t} x dt, for traceless x.

        The rank-one term rho_ss Tr(.) lifts the steady-state zero mode, so
        omega = 0 is regular; on traceless x it changes nothing.
        """
        d2 = self.dim * self.dim
        if abs(np.trace(x)) > 1e-12 * max(np.abs(x).max(), 1e-300):
            raise ValueError("resolvent source must be traceless")
        lift = np.outer(self.rho_ss.reshape(-1), np.eye(self.dim).reshape(-1))
        system = -1j * omega * np.eye(d2) - self.lmat + lift
        return linear_solve(system, x.reshape(-1)).reshape(self.dim, self.dim)

    def cross_spectrum(self, f1: np.ndarray, f2: np.ndarray, grid: Sequence) -> tuple:
        """int_0^inf e^{iwt} <df1(t) df2(0)> dt on the grid; singular points give NaN."""
        df1, df2 = self.fluct(f1), self.fluct(f2)
        source = df2 @ self.rho_ss
        out = np.empty(len(grid), dtype=complex)
        bad = []
        for i, w in enumerate(grid):
            try:
                x = self.resolvent_apply(float(w), source)
            except SingularMatrixError:
                out[i] = np.nan
                bad.append(i)
                continue
            out[i] = np.trace(df1 @ x)
        return SPECTRUM_NORMALIZATION * out, tuple(bad)


def spectrum(cfg: SchemeConfig, grid: Optional[Sequence] = None, components: bool = False) -> SpectrumResult:
    """Fluctuation spectrum on ``grid`` (default ``default_grid``) plus A+-."""
    grid = default_grid(cfg.omega_k) if grid is None else np.asarray(grid, dtype=float)
    model = InternalModel(cfg)
    f = force_operator(cfg)
    s, bad = model.cross_spectrum(f, f, grid)
    if bad:
        log.warning("resolvent singular at %d grid points", len(bad))
    a_plus, a_minus = _coefficients_from_model(model, cfg)
    comps = spectrum_components(cfg, grid, model=model) if components else None
    return SpectrumResult(grid, s, a_plus, a_minus, comps, bad)


def _coefficients_from_model(model: InternalModel, cfg: SchemeConfig) -> tuple:
    f = force_operator(cfg)
    s, bad = model.cross_spectrum(f, f, [-cfg.omega_k, cfg.omega_k])
    if bad:
        raise SingularPointError("resolvent singular at +-omega_k")
    return float(2 * s[0].real), float(2 * s[1].real)


def coefficients(cfg: SchemeConfig) -> tuple:
    """(A+, A-) = (2 Re S(-omega_k), 2 Re S(omega_k))."""
    return _coefficients_from_model(InternalModel(cfg), cfg)


def spectrum_components(cfg: SchemeConfig, grid: Sequence, model: Optional[InternalModel] = None) -> tuple:
    """(S_EIT, S_Stark, S_int) for the asymmetric scheme.

    f_EIT = lambda/sqrt(2) sigma_x^{d,b} and f_Stark = lambda/sqrt(6) sigma_x^{d,Y}
    are the parts of f connecting the dark state to |b> and |Y>; S_int holds
    both cross correlations.  While the internal steady state is |d><d| the
    remaining b-Y part of f does not contribute and the three sum to S.
    """
    if cfg.kind is not SchemeKind.ASYMMETRIC:
        raise ConfigError("spectrum decomposition is defined for the asymmetric scheme")
    model = InternalModel(cfg) if model is None else model
    f_eit, f_stark = force_parts(cfg)
    grid = np.asarray(grid, dtype=float)
    s_ee, _ = model.cross_spectrum(f_eit, f_eit, grid)
    s_ss, _ = model.cross_spectrum(f_stark, f_stark, grid)
    s_es, _ = model.cross_spectrum(f_eit, f_stark, grid)
    s_se, _ = model.cross_spectrum(f_stark, f_eit, grid)
    return s_ee, s_ss, s_es + s_se


def force_parts(cfg: SchemeConfig) -> tuple:
    """(f_EIT, f_Stark) in the bare internal basis."""
    basis = dressed_basis(SchemeKind.ASYMMETRIC)
    d, b, y = basis.ket("d"), basis.ket("b"), basis.ket("Y")
    return cfg.lam / np.sqrt(2.0) * sigma_x(d, b), cfg.lam / np.sqrt(6.0) * sigma_x(d, y)


def m_function(omega: float, cfg: SchemeConfig) -> complex:
    """M(w) = (-3 Omega^2/4 + 2 Delta w + 2 w^2)(Omega_g + w) - w Omega^2/4 + i Gamma w (w + Omega_g)."""
    om, og, dl, g = cfg.Omega, cfg.Omega_g, cfg.Delta_minus, cfg.Gamma
    return (-3 * om**2 / 4 + 2 * dl * omega + 2 * omega**2) * (og + omega) - omega * om**2 / 4 + 1j * g * omega * (omega + og)


def analytic_heating(cfg: SchemeConfig) -> float:
    """Closed-form asymmetric heating coefficient, Delta taken as Delta_minus."""
    if cfg.kind is not SchemeKind.ASYMMETRIC:
        raise ConfigError("analytic heating coefficient is for the asymmetric scheme")
    w = cfg.omega_k
    m = m_function(-w, cfg)
    if abs(m) < 1e-12:
        raise SingularPointError("|M(-omega_k)| vanishes")
    num = cfg.Gamma * cfg.eta**2 * w**2 * cfg.Omega**2 * (3 * cfg.Omega_g - 4 * w) ** 2
    return float(num / (12 * abs(m) ** 2))


def analytic_cooling_peak(cfg: SchemeConfig) -> tuple:
    """Peak cooling coefficient and its operating point.

    Asymmetric: 48 lambda^2 Omega^2 / (49 Gamma omega_k^2) at
    Delta = 3 Omega^2/(7 omega_k) - omega_k.  Symmetric: 2 Gamma lambda^2 / Omega^2
    at Omega_g = 2 omega_k, Delta_g = -omega_k.
    """
    w, lam, om, g = cfg.omega_k, cfg.lam, cfg.Omega, cfg.Gamma
    if cfg.kind is SchemeKind.ASYMMETRIC:
        value = 48 * lam**2 * om**2 / (49 * g * w**2)
        point = {"Delta_minus": 3 * om**2 / (7 * w) - w, "Omega_g": 4 * w / 3}
    elif cfg.kind is SchemeKind.SYMMETRIC:
        value = 2 * g * lam**2 / om**2
        point = {"Omega_g": 2 * w, "Delta_g": -w}
    else:
        raise ConfigError("peak formula is for the four-level schemes")
    return float(value), point


def internal_steady_state(cfg: SchemeConfig) -> np.ndarray:
    """4x4 steady state of the phonon-free internal dynamics."""
    return InternalModel(cfg).steady_state4()
