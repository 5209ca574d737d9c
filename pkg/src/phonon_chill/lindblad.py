"""Lindblad master-equation engine on the internal (x) Fock space.

Generator convention::

    L(rho) = -i[H, rho] + sum_k (r_k / 2) (2 o rho o^dag - o^dag o rho - rho o^dag o)

Time evolution never builds the d^2 x d^2 Liouvillian: the coherent part is
applied as dense matrix products with the non-Hermitian ``K = H - i/2 sum r o^dag o``
and the recycling terms ``r o rho o^dag`` as one sparse superoperator.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .operators import (
    HilbertSpace,
    annihilation,
    linear_solve,
    null_vector,
    kernel_dimension,
    SingularMatrixError,
)

log = logging.getLogger(__name__)

KERNEL_MAX_DIM = 40
TRACE_ABORT = 1e-7


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class _StepBudget(Exception):
    def __init__(self, time: float):
        super().__init__(time)
        self.time = float(time)


class DegenerateSteadyStateError(np.linalg.LinAlgError):
    pass


@dataclass
class DensityMatrix:
    space: HilbertSpace
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        d = self.space.total_dim
        if self.rho.shape != (d, d):
            raise ValueError(f"rho has shape {self.rho.shape}, expected {(d, d)}")

    def check(self, herm_tol=1e-10, trace_tol=1e-9, pos_tol=1e-8) -> None:
        if not np.all(np.isfinite(self.rho)):
            raise ValueError("density matrix has non-finite entries")
        h_err = np.max(np.abs(self.rho - self.rho.conj().T))
        if h_err > herm_tol:
            raise ValueError(f"density matrix not Hermitian ({h_err:.2e})")
        tr = np.trace(self.rho)
        if abs(tr - 1) > trace_tol:
            raise ValueError(f"density matrix trace {tr} != 1")
        if min_eigenvalue(self.rho) < -pos_tol:
            raise ValueError("density matrix has negative eigenvalues")

    def internal_populations(self) -> np.ndarray:
        return internal_populations(self.rho, self.space)

    def mean_phonon(self) -> float:
        return mean_phonon(self.rho, self.space)


@dataclass
class Trajectory:
    """Sampled observables of one master-equation run (times in 1/omega_k)."""

    times: np.ndarray
    n: np.ndarray
    populations: np.ndarray
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray
    states: Optional[np.ndarray] = None
    nfev: int = 0
    final_state: Optional[np.ndarray] = field(default=None, repr=False)


def min_eigenvalue(rho: np.ndarray) -> float:
    herm = 0.5 * (rho + rho.conj().T)
    return float(np.linalg.eigvalsh(herm)[0])


def internal_populations(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    diag = np.real(np.diag(rho)).reshape(space.internal_dim, space.fock_dim)
    return diag.sum(axis=1)


def phonon_distribution(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    diag = np.real(np.diag(rho)).reshape(space.internal_dim, space.fock_dim)
    return diag.sum(axis=0)


def mean_phonon(rho: np.ndarray, space: HilbertSpace) -> float:
    return float(phonon_distribution(rho, space) @ np.arange(space.fock_dim))


def _check_dims(h: np.ndarray, diss: Sequence, rho: np.ndarray) -> int:
    d = h.shape[0]
    if h.shape != (d, d) or rho.shape != (d, d):
        raise ValueError(f"dimension mismatch: H {h.shape}, rho {rho.shape}")
    for rate, o in diss:
        if o.shape != (d, d):
            raise ValueError(f"dimension mismatch: jump {o.shape} vs H {h.shape}")
        if rate < 0:
            raise ValueError(f"negative rate {rate}")
    return d


def apply_liouvillian(h: np.ndarray, diss: Sequence, rho: np.ndarray) -> np.ndarray:
    """Reference (direct) evaluation of the generator on one operator."""
    h = np.asarray(h, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    _check_dims(h, diss, rho)
    out = -1j * (h @ rho - rho @ h)
    for rate, o in diss:
        od = o.conj().T
        odo = od @ o
        out += rate / 2 * (2 * o @ rho @ od - odo @ rho - rho @ odo)
    return out


def liouvillian_matrix(h: np.ndarray, diss: Sequence) -> np.ndarray:
    """Dense superoperator acting on row-major vec(rho): vec(X rho Y) = (X (x) Y^T) vec(rho)."""
    h = np.asarray(h, dtype=complex)
    d = h.shape[0]
    eye = np.eye(d)
    lmat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, o in diss:
        odo = o.conj().T @ o
        lmat += rate / 2 * (2 * np.kron(o, o.conj()) - np.kron(odo, eye) - np.kron(eye, odo.T))
    return lmat


class Generator:
    """Matrix-free Lindblad generator with precomputed pieces."""

    def __init__(self, h: np.ndarray, diss: Sequence):
        h = np.asarray(h, dtype=complex)
        self.dim = d = h.shape[0]
        _check_dims(h, diss, np.zeros_like(h))
        k = h.copy()
        recycle = sp.csr_matrix((d * d, d * d), dtype=complex)
        for rate, o in diss:
            o = np.asarray(o, dtype=complex)
            k -= 0.5j * rate * (o.conj().T @ o)
            so = sp.csr_matrix(o)
            recycle = recycle + rate * sp.kron(so, so.conj(), format="csr")
        self.k = k
        self.k_dag = k.conj().T
        self.recycle = recycle.tocsr()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L(rho) for a general (not necessarily Hermitian) operator."""
        out = -1j * (self.k @ rho - rho @ self.k_dag)
        out += (self.recycle @ rho.reshape(-1)).reshape(self.dim, self.dim)
        return out

    def apply_hermitian(self, rho: np.ndarray) -> np.ndarray:
        """L(rho) assuming rho is Hermitian; output is exactly Hermitian."""
        # L(rho) = z + z^dag with z = -i K rho + J(rho)/2
        z = (self.recycle @ rho.reshape(-1)).reshape(self.dim, self.dim)
        z *= 0.5
        z -= 1j * (self.k @ rho)
        return z + z.conj().T


def _sample_grid(t_final: float, times: Optional[Sequence], n_samples: int) -> np.ndarray:
    if times is None:
        return np.linspace(0.0, t_final, n_samples)
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if grid[0] < 0 or grid[-1] > t_final * (1 + 1e-12):
        raise ValueError("sample times must lie in [0, t_final]")
    return grid


def evolve(
    h: np.ndarray,
    diss: Sequence,
    rho0: DensityMatrix,
    t_final: float,
    tol: float = 1e-8,
    times: Optional[Sequence] = None,
    n_samples: int = 201,
    store_states: bool = False,
    check_positivity: bool = True,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """Integrate d rho/dt = L(rho) with the Dormand-Prince 5(4) pair.

    Observables are recorded on ``times`` (default: ``n_samples`` uniform
    points).  Trace drift beyond 1e-7 aborts instead of renormalizing.
    Step-size underflow, or more than ``max_steps`` steps, raises
    IntegrationError carrying the time reached.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    rho0.check()
    space = rho0.space
    gen = Generator(h, diss)
    d = gen.dim
    if d != space.total_dim:
        raise ValueError("Hamiltonian does not match the state space")
    grid = _sample_grid(t_final, times, n_samples)

    budget = None if max_steps is None else 6 * max_steps + 2
    calls = [0]

    def rhs(t, y):
        calls[0] += 1
        if budget is not None and calls[0] > budget:
            raise _StepBudget(t)
        return gen.apply_hermitian(y.reshape(d, d)).reshape(-1)

    try:
        sol = solve_ivp(
            rhs,
            (0.0, float(grid[-1])),
            rho0.rho.reshape(-1),
            method="RK45",
            t_eval=grid,
            rtol=tol,
            atol=tol * 1e-3,
        )
    except _StepBudget as stop:
        raise IntegrationError(f"step budget of {max_steps} exhausted (stiff problem?)", stop.time) from None
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"integration failed: {sol.message}", t_fail)

    m = grid.size
    n = np.empty(m)
    pops = np.empty((m, 4))
    tr_err = np.empty(m)
    h_err = np.empty(m)
    mins = np.full(m, np.nan)
    states = np.empty((m, d, d), dtype=complex) if store_states else None
    num = np.arange(space.fock_dim)
    for i in range(m):
        rho = sol.y[:, i].reshape(d, d)
        diag = np.real(np.diag(rho)).reshape(4, space.fock_dim)
        pops[i] = diag.sum(axis=1)
        n[i] = diag.sum(axis=0) @ num
        tr_err[i] = abs(np.trace(rho) - 1.0)
        h_err[i] = np.max(np.abs(rho - rho.conj().T))
        if check_positivity:
            mins[i] = min_eigenvalue(rho)
        if store_states:
            states[i] = rho
        if tr_err[i] > TRACE_ABORT:
            raise IntegrationError(f"trace drift {tr_err[i]:.2e} exceeds {TRACE_ABORT:.0e}", grid[i])
    return Trajectory(
        times=grid, n=n, populations=pops, trace_error=tr_err, hermiticity_error=h_err,
        min_eigenvalue=mins, states=states, nfev=sol.nfev,
        final_state=sol.y[:, -1].reshape(d, d).copy(),
    )


def steady_state(
    h: np.ndarray,
    diss: Sequence,
    space: HilbertSpace,
    method: str = "auto",
    rate_hint: Optional[float] = None,
    tol: float = 1e-10,
) -> DensityMatrix:
    """Steady state of the generator.

    ``method`` is "kernel" (dense vectorized Liouvillian with a trace
    constraint), "evolve" (long-time integration) or "auto" (kernel for
    total_dim <= 40).  A kernel of dimension > 1 raises
    DegenerateSteadyStateError.
    """
    if not diss:
        raise ValueError("steady state needs at least one dissipator")
    d = space.total_dim
    if method == "auto":
        method = "kernel" if d <= KERNEL_MAX_DIM else "evolve"
    if method == "kernel":
        rho = _kernel_steady_state(h, diss, d)
    elif method == "evolve":
        rho = _evolved_steady_state(h, diss, space, rate_hint)
    else:
        raise ValueError(f"unknown method {method!r}")
    gen = Generator(h, diss)
    resid = np.linalg.norm(gen.apply(rho))
    scale = np.linalg.norm(gen.k) + sum(r for r, _ in diss)
    if method == "kernel" and resid > 1e-9 * scale:
        raise np.linalg.LinAlgError(f"steady-state residual {resid:.2e} too large")
    return DensityMatrix(space, rho)


def _kernel_steady_state(h, diss, d) -> np.ndarray:
    lmat = liouvillian_matrix(h, diss)
    if d * d <= 256:
        if kernel_dimension(lmat) > 1:
            raise DegenerateSteadyStateError("Liouvillian kernel is degenerate")
        vec = null_vector(lmat)
        rho = vec.reshape(d, d)
        rho = rho / np.trace(rho)
    else:
        # row of the (0,0) equation is redundant with trace preservation
        system = lmat.copy()
        system[0, :] = np.eye(d).reshape(-1)
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        try:
            rho = linear_solve(system, rhs).reshape(d, d)
        except SingularMatrixError as exc:
            raise DegenerateSteadyStateError("Liouvillian kernel is degenerate") from exc
    return 0.5 * (rho + rho.conj().T)


def _evolved_steady_state(h, diss, space, rate_hint, max_chunks=400) -> np.ndarray:
    """Evolve in chunks of ~1/rate until successive states agree to 1e-10."""
    d = space.total_dim
    rate = rate_hint if rate_hint and rate_hint > 0 else 1e-2
    chunk = 1.0 / rate
    horizon = 20.0 / rate
    gen = Generator(h, diss)
    rho = np.eye(d, dtype=complex) / d
    t = 0.0

    def rhs(_t, y):
        return gen.apply_hermitian(y.reshape(d, d)).reshape(-1)

    for _ in range(max_chunks):
        sol = solve_ivp(rhs, (0.0, chunk), rho.reshape(-1), method="RK45", rtol=1e-10, atol=1e-13)
        if sol.status != 0:
            raise IntegrationError(f"steady-state evolution failed: {sol.message}", t)
        new = sol.y[:, -1].reshape(d, d)
        t += chunk
        change = np.abs(new - rho).sum()
        rho = new
        if t >= horizon and change <= 1e-10:
            break
    else:
        log.warning("long-time steady state did not converge (last change %.2e)", change)
    return 0.5 * (rho + rho.conj().T)


def expectation(op: np.ndarray, rho) -> complex:
    r = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho)
    op = np.asarray(op)
    if op.shape != r.shape:
        raise ValueError(f"dimension mismatch: {op.shape} vs {r.shape}")
    return complex(np.sum(op * r.T))


def thermal_phonon_state(n_f: int, n_mean: float) -> np.ndarray:
    """Thermal Fock distribution with mean n_mean, truncated at n_f and renormalized."""
    if n_mean < 0:
        raise ValueError("mean occupation must be >= 0")
    if n_mean == 0:
        p = np.zeros(n_f)
        p[0] = 1.0
    else:
        ratio = n_mean / (n_mean + 1)
        p = ratio ** np.arange(n_f)
        p /= p.sum()
    return np.diag(p).astype(complex)


def number_operator(space: HilbertSpace) -> np.ndarray:
    a = annihilation(space.fock_dim)
    return space.phonon_op(a.conj().T @ a)


