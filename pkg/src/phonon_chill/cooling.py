"""Cooling predictions: bath occupation, rate equation, full dynamics, robustness."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import minimize

from .lindblad import DensityMatrix, Trajectory, evolve, thermal_phonon_state
from .operators import HilbertSpace
from .schemes import (
    SchemeConfig,
    SchemeKind,
    asymmetric,
    bare_hamiltonian,
    dissipators,
    eit_baseline,
    stark_baseline,
    symmetric,
)
from .spectrum import coefficients, internal_steady_state

log = logging.getLogger(__name__)


class HeatingDominatedError(ArithmeticError):
    pass


def thermal_occupation(omega_si: float, temperature: float) -> float:
    """Bose-Einstein occupation 1/(exp(hbar w / k_B T) - 1); 0 at T = 0."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if omega_si <= 0:
        raise ValueError("frequency must be positive")
    if temperature == 0:
        return 0.0
    x = constants.hbar * omega_si / (constants.k * temperature)
    return 1.0 / math.expm1(x)


def rate_equation_nss(a_plus: float, a_minus: float, n_bath: float, gamma_k: float) -> float:
    """Final phonon number (A+ + N gamma_k) / (W + gamma_k) with W = A- - A+."""
    if gamma_k < 0:
        raise ValueError("gamma_k must be >= 0")
    denom = a_minus - a_plus + gamma_k
    if denom <= 0:
        raise HeatingDominatedError(f"heating dominates: W + gamma_k = {denom:.3e}")
    return (a_plus + n_bath * gamma_k) / denom


def rate_equation_n(t, n0, a_plus, a_minus, n_bath=0.0, gamma_k=0.0):
    """Solution of dn/dt = -(W + gamma_k) n + A+ + N gamma_k."""
    n_ss = rate_equation_nss(a_plus, a_minus, n_bath, gamma_k)
    rate = a_minus - a_plus + gamma_k
    return n_ss + (n0 - n_ss) * np.exp(-rate * np.asarray(t, dtype=float))


def scheme_nss(cfg: SchemeConfig) -> float:
    ap, am = coefficients(cfg)
    return rate_equation_nss(ap, am, cfg.n_thermal, cfg.gamma_k)


# --- full dynamics --------------------------------------------------------

@dataclass
class CoolingResult:
    trajectory: Trajectory
    fitted_w: float
    n_ss_dynamic: float
    n_ss_rate_eq: float
    scheme: SchemeConfig
    a_plus: float
    a_minus: float
    fit_residual: float
    non_exponential: bool
    fit_window: tuple
    tail_population: float
    tail_rise: float

    @property
    def n_final(self) -> float:
        return float(self.trajectory.n[-1])

    def summary(self) -> dict:
        tr = self.trajectory
        return {
            "kind": self.scheme.kind.value,
            "n_initial": float(tr.n[0]),
            "n_final": self.n_final,
            "fitted_w": self.fitted_w,
            "n_ss_dynamic": self.n_ss_dynamic,
            "n_ss_rate_eq": self.n_ss_rate_eq,
            "a_plus": self.a_plus,
            "a_minus": self.a_minus,
            "fit_residual": self.fit_residual,
            "non_exponential": self.non_exponential,
            "tail_population": self.tail_population,
            "tail_rise": self.tail_rise,
            "max_trace_error": float(tr.trace_error.max()),
            "max_hermiticity_error": float(tr.hermiticity_error.max()),
            "min_eigenvalue": float(np.nanmin(tr.min_eigenvalue)),
        }


def initial_state(cfg: SchemeConfig, space: HilbertSpace, n0: float) -> DensityMatrix:
    """Internal steady state (the dark state for the four-level schemes) x thermal phonons."""
    rho_int = internal_steady_state(cfg)
    return DensityMatrix(space, np.kron(rho_int, thermal_phonon_state(space.fock_dim, n0)))


def fit_decay(times: np.ndarray, n: np.ndarray, floor: float) -> tuple:
    """Least-squares fit of log(n - floor) = c - W t over the central decay window.

    The window opens once n - floor has dropped 10% and closes where n is
    within 2x of the floor (or the excess falls below 1e-3 of its start).
    Returns (W, rms residual relative to the initial excess, (t_start, t_end)).
    """
    excess = n - floor
    amp = excess[0]
    if amp <= 0:
        return 0.0, 0.0, (float(times[0]), float(times[-1]))
    start = int(np.argmax(excess <= 0.9 * amp)) if np.any(excess <= 0.9 * amp) else 0
    stop_mask = (excess <= max(floor, 1e-3 * amp)) | (excess <= 0)
    stop_mask[:start] = False
    stop = int(np.argmax(stop_mask)) if np.any(stop_mask) else len(times)
    if stop - start < 3:
        start = 0
        stop = max(stop, min(len(times), 3))
    t = times[start:stop]
    y = excess[start:stop]
    ok = y > 0
    t, y = t[ok], y[ok]
    if t.size < 2:
        return 0.0, 0.0, (float(times[0]), float(times[-1]))
    slope, intercept = np.polyfit(t, np.log(y), 1)
    model = np.exp(intercept + slope * t)
    resid = float(np.sqrt(np.mean((model - y) ** 2)) / amp)
    return float(-slope), resid, (float(t[0]), float(t[-1]))


def cooling_trajectory(
    cfg: SchemeConfig,
    n0: float = 1.0,
    t_final: float = 1e3,
    n_samples: int = 201,
    tol: float = 1e-8,
    space: Optional[HilbertSpace] = None,
) -> CoolingResult:
    """Full master-equation cooling run from (internal steady state) x thermal(n0)."""
    space = HilbertSpace(cfg.fock_dim) if space is None else space
    if n0 > space.fock_dim / 3:
        raise ValueError(f"n0 = {n0} not representable with fock_dim = {space.fock_dim}")
    h = bare_hamiltonian(cfg, space)
    diss = dissipators(cfg, space)
    rho0 = initial_state(cfg, space, n0)
    traj = evolve(h, diss, rho0, t_final, tol=tol, n_samples=n_samples)

    ap, am = coefficients(cfg)
    try:
        n_rate = rate_equation_nss(ap, am, cfg.n_thermal, cfg.gamma_k)
    except HeatingDominatedError:
        n_rate = math.inf
    tail = max(3, len(traj.n) // 20)
    n_dyn = float(np.mean(traj.n[-tail:]))
    # the floor is the dynamic tail only if the decay has visibly finished
    remaining = abs(traj.n[-1] - traj.n[int(0.8 * (len(traj.n) - 1))])
    settled = remaining <= 0.1 * abs(traj.n[-1]) + 1e-12
    floor = min(n_dyn, traj.n.min()) if settled else (n_rate if np.isfinite(n_rate) else 0.0)
    if lam_is_zero(cfg):
        w, resid, window = 0.0, 0.0, (float(traj.times[0]), float(traj.times[-1]))
    else:
        w, resid, window = fit_decay(traj.times, traj.n, floor)
    amp = abs(traj.n[0] - floor)
    half = traj.n[len(traj.n) // 2:]
    rise = float(max(0.0, np.max(np.diff(half), initial=0.0)) / amp) if amp > 0 else 0.0
    final = traj.final_state
    top = np.real(np.diag(final)).reshape(4, space.fock_dim)[:, -2:].sum()
    if cfg.n_thermal > 1e3 and top > 1e-4:
        log.warning("Fock truncation: top-level population %.2e exceeds 1e-4", top)
    return CoolingResult(
        trajectory=traj, fitted_w=w, n_ss_dynamic=n_dyn, n_ss_rate_eq=n_rate, scheme=cfg,
        a_plus=ap, a_minus=am, fit_residual=resid, non_exponential=resid > 0.2,
        fit_window=window, tail_population=float(top), tail_rise=rise,
    )


def lam_is_zero(cfg: SchemeConfig) -> bool:
    return cfg.lam == 0.0


# --- robustness -----------------------------------------------------------

@dataclass
class RobustnessReport:
    parameter: str
    deviations: np.ndarray
    delta_n: np.ndarray
    slope: float
    slope_negative: float
    slope_positive: float
    n_reference: float

    def rows(self):
        return list(zip(self.deviations.tolist(), self.delta_n.tolist()))


ROBUST_PARAMETERS = ("Omega_g", "Delta_g", "Omega")


def perturbed(cfg: SchemeConfig, parameter: str, deviation: float) -> SchemeConfig:
    """Scale one field by (1 + deviation); the laser detunings stay put."""
    if parameter not in ROBUST_PARAMETERS:
        raise ValueError(f"parameter must be one of {ROBUST_PARAMETERS}")
    value = getattr(cfg, parameter)
    if value is None:
        raise ValueError(f"{cfg.kind.value} scheme has no {parameter}")
    return cfg.replace(**{parameter: value * (1 + deviation)}, enforce_dark=False)


def _loglog_slope(x, y) -> float:
    x, y = np.abs(np.asarray(x)), np.abs(np.asarray(y))
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def robustness_scan(cfg: SchemeConfig, parameter: str, deviations: Sequence[float]) -> RobustnessReport:
    """Rate-equation change of <n>_ss under relative deviations of one parameter."""
    dev = np.asarray(deviations, dtype=float)
    if np.any(np.abs(dev) > 0.1 + 1e-12):
        raise ValueError("deviations must lie within +-10%")
    n_ref = scheme_nss(cfg)
    dn = np.array([scheme_nss(perturbed(cfg, parameter, float(x))) - n_ref for x in dev])
    neg, pos = dev < 0, dev > 0
    return RobustnessReport(
        parameter=parameter, deviations=dev, delta_n=dn,
        slope=_loglog_slope(dev[dev != 0], dn[dev != 0]),
        slope_negative=_loglog_slope(dev[neg], dn[neg]) if neg.sum() >= 2 else float("nan"),
        slope_positive=_loglog_slope(dev[pos], dn[pos]) if pos.sum() >= 2 else float("nan"),
        n_reference=n_ref,
    )


@dataclass
class JointRobustness:
    parameters: tuple
    grid_first: np.ndarray
    grid_second: np.ndarray
    mixed: np.ndarray
    exponents: tuple
    n_first_only: np.ndarray


def joint_robustness(
    cfg: SchemeConfig,
    second: str,
    deviations_omega: Sequence[float],
    deviations_second: Sequence[float],
) -> JointRobustness:
    """Mixed response to simultaneous Omega and ``second`` deviations.

    The mixed difference n(dO, dX) - n(dO, 0) - n(0, dX) + n(0, 0) isolates
    the part that needs both errors; a two-variable fit of
    log|mixed| = p log|dO| + q log|dX| + c returns (p, q).
    """
    d1 = np.asarray(deviations_omega, dtype=float)
    d2 = np.asarray(deviations_second, dtype=float)

    def n_at(x1, x2):
        c = perturbed(cfg, "Omega", x1) if x1 else cfg
        c = perturbed(c, second, x2) if x2 else c
        return scheme_nss(c)

    n00 = n_at(0.0, 0.0)
    row = {x1: n_at(x1, 0.0) for x1 in d1}
    col = {x2: n_at(0.0, x2) for x2 in d2}
    mixed = np.array([[n_at(x1, x2) - row[x1] - col[x2] + n00 for x2 in d2] for x1 in d1])
    g1, g2 = np.meshgrid(d1, d2, indexing="ij")
    ok = np.abs(mixed) > 0
    design = np.column_stack([np.log(np.abs(g1[ok])), np.log(np.abs(g2[ok])), np.ones(ok.sum())])
    coef, *_ = np.linalg.lstsq(design, np.log(np.abs(mixed[ok])), rcond=None)
    return JointRobustness(("Omega", second), d1, d2, mixed, (float(coef[0]), float(coef[1])),
                           np.array([row[x] - n00 for x in d1]))


# --- scheme comparison ----------------------------------------------------

def tune_stark_baseline(lam, Omega, Gamma, t_horizon, n0=1.0, omega_k=1.0, **kw) -> SchemeConfig:
    """Best-case Stark-shift baseline for a horizon.

    Delta_g is held at the gate value -omega_k; (Omega_g, Delta) are chosen in
    [0.25, 2] omega_k x [-2 Omega, 2 Omega] to minimize the rate-equation
    phonon number at ``t_horizon``.
    """
    n_bath, gamma_k = kw.get("n_thermal", 0.0), kw.get("gamma_k", 0.0)
    bounds = [(0.25 * omega_k, 2.0 * omega_k), (-2.0 * Omega, 2.0 * Omega)]

    def build(x):
        return stark_baseline(lam, Omega, Gamma, Omega_g=float(x[0]), Delta=float(x[1]),
                              Delta_g=-omega_k, omega_k=omega_k, **kw)

    def objective(x):
        ap, am = coefficients(build(x))
        try:
            return float(rate_equation_n(t_horizon, n0, ap, am, n_bath, gamma_k))
        except HeatingDominatedError:
            return 10.0 * (1 + n0)

    starts = [(og, dl) for og in np.linspace(*bounds[0], 8) for dl in np.linspace(*bounds[1], 17)]
    x0 = min(starts, key=objective)
    res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                   options={"xatol": 1e-4, "fatol": 1e-10})
    best = res.x if res.fun <= objective(x0) else x0
    return build(best)


def scheme_set(lam, Omega, Gamma, t_horizon, n0=1.0, kinds=None, **kw) -> list:
    """Configs sharing lambda, Omega, Gamma and bath, each at its own working point."""
    kinds = [SchemeKind(k) for k in (kinds or list(SchemeKind))]
    out = []
    for kind in kinds:
        if kind is SchemeKind.ASYMMETRIC:
            out.append(asymmetric(lam, Omega, Gamma, **kw))
        elif kind is SchemeKind.SYMMETRIC:
            out.append(symmetric(lam, Omega, Gamma, **kw))
        elif kind is SchemeKind.EIT_BASELINE:
            out.append(eit_baseline(lam, Omega, Gamma, **kw))
        else:
            out.append(tune_stark_baseline(lam, Omega, Gamma, t_horizon, n0=n0, **kw))
    return out


def figure3_schemes(eta: float, Omega: float, t_horizon: float = 2e4, fock_dim: int = 10) -> list:
    """The four schemes of one comparison panel: zero temperature, Gamma = 150 lambda."""
    lam = eta
    return scheme_set(lam, Omega, 150 * lam, t_horizon, fock_dim=fock_dim)


@dataclass
class ComparisonRow:
    index: int
    kind: str
    n_final: float = float("nan")
    fitted_w: float = float("nan")
    n_ss_rate_eq: float = float("nan")
    rank: Optional[int] = None
    error: Optional[str] = None
    result: Optional[CoolingResult] = field(default=None, repr=False)


def _ordered_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def compare_schemes(cfgs: Sequence[SchemeConfig], t_final: float, n0: float = 1.0,
                    threads: int = 1, **traj_kw) -> list:
    """Run every config to t_final and rank by final <n>; failures stay in their row."""
    ref = cfgs[0]
    for c in cfgs[1:]:
        if (c.omega_k, c.lam, c.Gamma, c.gamma_k, c.n_thermal) != (ref.omega_k, ref.lam, ref.Gamma, ref.gamma_k, ref.n_thermal):
            raise ValueError("compared schemes must share omega_k, lambda, Gamma and bath")

    def run(item):
        i, cfg = item
        row = ComparisonRow(index=i, kind=cfg.kind.value)
        try:
            res = cooling_trajectory(cfg, n0=n0, t_final=t_final, **traj_kw)
        except Exception as exc:  # isolate per-row failures
            row.error = f"{type(exc).__name__}: {exc}"
            return row
        row.n_final, row.fitted_w, row.n_ss_rate_eq, row.result = res.n_final, res.fitted_w, res.n_ss_rate_eq, res
        return row

    rows = _ordered_map(run, enumerate(cfgs), threads)
    ok = sorted((r for r in rows if r.error is None), key=lambda r: (r.n_final, r.index))
    for rank, r in enumerate(ok, start=1):
        r.rank = rank
    return rows
