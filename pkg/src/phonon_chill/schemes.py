"""Rotating-frame models of the four-level cooling schemes and their baselines.

Frequencies are in units of the vibrational frequency omega_k (normally 1).
Internal levels are ordered (|A2>, |+1>, |0>, |-1>).

Rotating frame of the asymmetric scheme: with |-1> as the energy reference,
|A2> sits at -Delta_minus and the microwave-coupled pair |+1>, |0> at
Delta_plus - Delta_minus.  Under the dark-state condition
Delta_minus = Delta_plus + Omega_g/2 this is -Omega_g/2, which gives |d>
and |b> zero energy and |Y> energy -Omega_g, i.e. the free part of the
dressed-basis Hamiltonian.  The Zeeman splitting and zero-field splitting
are absorbed by the frame and carry no runtime representation.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .operators import (
    HilbertSpace,
    annihilation,
    assert_hermitian,
    basis_projector,
    number,
)

A2, PLUS, ZERO, MINUS = 0, 1, 2, 3
LEVEL_NAMES = ("A2", "+1", "0", "-1")


class SchemeKind(str, enum.Enum):
    ASYMMETRIC = "asymmetric"
    SYMMETRIC = "symmetric"
    EIT_BASELINE = "eit"
    STARK_BASELINE = "stark"


class ConfigError(ValueError):
    pass


_REQUIRED = {
    SchemeKind.ASYMMETRIC: ("Omega", "Omega_g", "Delta_plus", "Delta_minus"),
    SchemeKind.SYMMETRIC: ("Omega", "Omega_g", "Delta", "Delta_g"),
    SchemeKind.EIT_BASELINE: ("Omega", "Delta"),
    SchemeKind.STARK_BASELINE: ("Omega", "Omega_g", "Delta", "Delta_g"),
}

_DEFAULT_BRANCHING = {
    SchemeKind.ASYMMETRIC: (1 / 3, 1 / 3, 1 / 3),
    SchemeKind.SYMMETRIC: (1 / 3, 1 / 3, 1 / 3),
    # masked levels receive no decay
    SchemeKind.EIT_BASELINE: (0.5, 0.0, 0.5),
    SchemeKind.STARK_BASELINE: (0.5, 0.5, 0.0),
}

_ACTIVE_LEVELS = {
    SchemeKind.ASYMMETRIC: (A2, PLUS, ZERO, MINUS),
    SchemeKind.SYMMETRIC: (A2, PLUS, ZERO, MINUS),
    SchemeKind.EIT_BASELINE: (A2, PLUS, MINUS),
    SchemeKind.STARK_BASELINE: (A2, PLUS, ZERO),
}


@dataclass(frozen=True)
class SchemeConfig:
    """Full parameter set of one cooling scheme, frequencies in units of omega_k.

    ``branching`` holds the decay fractions of |A2> into (|+1>, |0>, |-1>).
    ``enforce_dark`` rejects asymmetric configs that violate the dark-state
    condition; robustness scans switch it off to apply detuning offsets.
    """

    kind: SchemeKind
    lam: float
    Gamma: float
    omega_k: float = 1.0
    Omega: Optional[float] = None
    Omega_g: Optional[float] = None
    Delta_plus: Optional[float] = None
    Delta_minus: Optional[float] = None
    Delta: Optional[float] = None
    Delta_g: Optional[float] = None
    branching: Optional[tuple] = None
    gamma_k: float = 0.0
    n_thermal: float = 0.0
    fock_dim: int = 15
    enforce_dark: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.branching is None:
            object.__setattr__(self, "branching", _DEFAULT_BRANCHING[self.kind])
        object.__setattr__(self, "branching", tuple(float(b) for b in self.branching))
        self.validate()

    @property
    def eta(self) -> float:
        return self.lam / self.omega_k

    @property
    def active_levels(self) -> tuple:
        return _ACTIVE_LEVELS[self.kind]

    @property
    def dark_offset(self) -> float:
        """Delta_plus - Delta_minus + Omega_g/2; zero under the dark-state condition."""
        if self.kind is not SchemeKind.ASYMMETRIC:
            return 0.0
        return self.Delta_plus - self.Delta_minus + self.Omega_g / 2

    def validate(self) -> None:
        if not self.omega_k > 0:
            raise ConfigError("omega_k must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not self.Gamma > 0:
            raise ConfigError("Gamma must be > 0")
        if self.fock_dim < 2:
            raise ConfigError("fock_dim must be >= 2")
        if self.gamma_k < 0 or self.n_thermal < 0:
            raise ConfigError("gamma_k and n_thermal must be >= 0")
        if len(self.branching) != 3 or min(self.branching) < 0:
            raise ConfigError("branching must be three non-negative fractions")
        if abs(sum(self.branching) - 1.0) > 1e-12:
            raise ConfigError(f"branching fractions sum to {sum(self.branching)!r}, not 1")
        missing = [f for f in _REQUIRED[self.kind] if getattr(self, f) is None]
        if missing:
            raise ConfigError(f"{self.kind.value} scheme requires {', '.join(missing)}")
        for name in _REQUIRED[self.kind]:
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.kind is SchemeKind.ASYMMETRIC and self.enforce_dark:
            if abs(self.dark_offset) > 1e-12 * max(1.0, abs(self.Delta_minus)):
                raise ConfigError(
                    "asymmetric scheme requires Delta_minus = Delta_plus + Omega_g/2 "
                    f"(offset {self.dark_offset:.3e}); pass enforce_dark=False for offsets"
                )

    def replace(self, **changes) -> "SchemeConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kind"] = self.kind.value
        out["branching"] = list(self.branching)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SchemeConfig":
        data = dict(data)
        if data.get("branching") is not None:
            data["branching"] = tuple(data["branching"])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown SchemeConfig fields: {sorted(unknown)}")
        return cls(**data)


def asymmetric_peak_detuning(Omega: float, omega_k: float = 1.0) -> float:
    """Laser detuning Delta_minus that maximizes the asymmetric cooling coefficient."""
    return 3 * Omega**2 / (7 * omega_k) - omega_k


def eit_detuning(Omega: float, omega_k: float = 1.0) -> float:
    """Common detuning that light-shifts the EIT bright state onto the red sideband.

    The bright state couples to |A2> with Omega/sqrt(2); its shift
    (sqrt(Delta^2 + 2 Omega^2) - Delta)/2 equals omega_k at this detuning.
    """
    return Omega**2 / (2 * omega_k) - omega_k


def asymmetric(lam, Omega, Gamma, *, Omega_g=None, Delta_minus=None, omega_k=1.0, **kw) -> SchemeConfig:
    """Asymmetric scheme, by default at the gate point and the cooling peak."""
    Omega_g = 4 * omega_k / 3 if Omega_g is None else Omega_g
    Delta_minus = asymmetric_peak_detuning(Omega, omega_k) if Delta_minus is None else Delta_minus
    return SchemeConfig(
        kind=SchemeKind.ASYMMETRIC, lam=lam, Gamma=Gamma, omega_k=omega_k, Omega=Omega,
        Omega_g=Omega_g, Delta_minus=Delta_minus, Delta_plus=Delta_minus - Omega_g / 2, **kw,
    )


def symmetric(lam, Omega, Gamma, *, Omega_g=None, Delta_g=None, Delta=None, omega_k=1.0, **kw) -> SchemeConfig:
    """Symmetric scheme, by default at Omega_g = 2 omega_k, Delta_g = -omega_k.

    The laser detuning defaults to -omega_k, which puts |A2> on the cooling
    resonance; the peak cooling coefficient itself does not depend on it.
    """
    return SchemeConfig(
        kind=SchemeKind.SYMMETRIC, lam=lam, Gamma=Gamma, omega_k=omega_k, Omega=Omega,
        Omega_g=2 * omega_k if Omega_g is None else Omega_g,
        Delta_g=-omega_k if Delta_g is None else Delta_g,
        Delta=-omega_k if Delta is None else Delta, **kw,
    )


def eit_baseline(lam, Omega, Gamma, *, Delta=None, omega_k=1.0, **kw) -> SchemeConfig:
    return SchemeConfig(
        kind=SchemeKind.EIT_BASELINE, lam=lam, Gamma=Gamma, omega_k=omega_k, Omega=Omega,
        Delta=eit_detuning(Omega, omega_k) if Delta is None else Delta, **kw,
    )


def stark_baseline(lam, Omega, Gamma, *, Omega_g=None, Delta_g=None, Delta=None, omega_k=1.0, **kw) -> SchemeConfig:
    """Three-level Stark-shift configuration on (|+1>, |0>, |A2>).

    Defaults: Delta_g = -omega_k (the Stark-shift gate point), Omega_g =
    omega_k/2 and a red laser detuning Delta = -2 Omega.  ``cooling.tune_stark_baseline``
    picks (Omega_g, Delta) per comparison horizon instead.
    """
    return SchemeConfig(
        kind=SchemeKind.STARK_BASELINE, lam=lam, Gamma=Gamma, omega_k=omega_k, Omega=Omega,
        Omega_g=omega_k / 2 if Omega_g is None else Omega_g,
        Delta_g=-omega_k if Delta_g is None else Delta_g,
        Delta=-2 * Omega if Delta is None else Delta, **kw,
    )


# --- internal operators ---------------------------------------------------

def proj(i: int, j: Optional[int] = None) -> np.ndarray:
    return basis_projector(4, i, j)


def sigma_x(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """|u><v| + |v><u| for internal kets."""
    return np.outer(u, v.conj()) + np.outer(v, u.conj())


def sigma_z() -> np.ndarray:
    """Spin operator |+1><+1| - |-1><-1| entering the magnetic coupling."""
    return proj(PLUS) - proj(MINUS)


def internal_hamiltonian(cfg: SchemeConfig) -> np.ndarray:
    """Phonon-free 4x4 rotating-frame Hamiltonian of the internal levels."""
    k = cfg.kind
    if k is SchemeKind.ASYMMETRIC:
        ground = cfg.Delta_plus - cfg.Delta_minus
        h = -cfg.Delta_minus * proj(A2) + ground * (proj(PLUS) + proj(ZERO))
        h = h + cfg.Omega / 2 * (proj(A2, PLUS) + proj(A2, MINUS))
        h = h + cfg.Omega_g / 2 * proj(PLUS, ZERO)
    elif k is SchemeKind.SYMMETRIC:
        h = -cfg.Delta * proj(A2) + cfg.Delta_g * proj(ZERO)
        h = h + cfg.Omega / 2 * (proj(A2, PLUS) + proj(A2, MINUS))
        h = h + cfg.Omega_g / 2 * (proj(PLUS, ZERO) + proj(MINUS, ZERO))
    elif k is SchemeKind.EIT_BASELINE:
        h = -cfg.Delta * proj(A2) + cfg.Omega / 2 * (proj(A2, PLUS) + proj(A2, MINUS))
    elif k is SchemeKind.STARK_BASELINE:
        h = -cfg.Delta * proj(A2) + cfg.Delta_g * proj(ZERO)
        h = h + cfg.Omega / 2 * proj(A2, PLUS) + cfg.Omega_g / 2 * proj(PLUS, ZERO)
    else:  # pragma: no cover
        raise ConfigError(f"unknown kind {k}")
    diag = np.diag(np.diag(h))
    upper = h - diag
    return diag + upper + upper.conj().T


def internal_jumps(cfg: SchemeConfig) -> list:
    """Spontaneous-emission channels |i><A2| with rates branching_i * Gamma."""
    out = []
    for frac, level in zip(cfg.branching, (PLUS, ZERO, MINUS)):
        if frac > 0:
            out.append((frac * cfg.Gamma, proj(level, A2)))
    return out


def _space(cfg: SchemeConfig, space: Optional[HilbertSpace]) -> HilbertSpace:
    space = HilbertSpace(cfg.fock_dim) if space is None else space
    if space.fock_dim < 2:
        raise ConfigError("fock_dim too small")
    return space


def bare_hamiltonian(cfg: SchemeConfig, space: Optional[HilbertSpace] = None) -> np.ndarray:
    """Rotating-frame Hamiltonian on internal (x) Fock space, including
    the coupling lambda (a + a^dag) (|+1><+1| - |-1><-1|)."""
    space = _space(cfg, space)
    a = annihilation(space.fock_dim)
    h = space.internal_op(internal_hamiltonian(cfg))
    h = h + cfg.omega_k * space.phonon_op(number(space.fock_dim))
    h = h + cfg.lam * np.kron(sigma_z(), a + a.conj().T)
    assert_hermitian(h, name="bare Hamiltonian")
    return h


# --- dressed bases --------------------------------------------------------

@dataclass(frozen=True)
class DressedBasis:
    """Rows of ``u`` are the dressed kets written in the bare basis."""

    labels: tuple
    u: np.ndarray

    def ket(self, label: str) -> np.ndarray:
        return self.u[self.labels.index(label)]


def dressed_basis(kind: SchemeKind) -> DressedBasis:
    kind = SchemeKind(kind)
    s2, s3, s6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)
    if kind is SchemeKind.ASYMMETRIC:
        labels = ("A2", "d", "b", "Y")
        rows = [
            [1, 0, 0, 0],
            [0, 1 / s3, 1 / s3, -1 / s3],
            [0, 1 / s6, 1 / s6, 2 / s6],
            [0, 1 / s2, -1 / s2, 0],
        ]
    elif kind is SchemeKind.SYMMETRIC:
        labels = ("A2", "D", "B", "0")
        rows = [
            [1, 0, 0, 0],
            [0, 1 / s2, 0, -1 / s2],
            [0, 1 / s2, 0, 1 / s2],
            [0, 0, 1, 0],
        ]
    else:
        raise ConfigError(f"no dressed basis for {kind.value}")
    return DressedBasis(labels, np.array(rows, dtype=complex))


def to_dressed(op: np.ndarray, basis: DressedBasis) -> np.ndarray:
    """Matrix elements <i|op|j> in the dressed basis (internal or full space)."""
    u = basis.u
    if op.shape[0] != 4:
        u = np.kron(u, np.eye(op.shape[0] // 4))
    return u.conj() @ op @ u.T


def from_dressed(op: np.ndarray, basis: DressedBasis) -> np.ndarray:
    u = basis.u
    if op.shape[0] != 4:
        u = np.kron(u, np.eye(op.shape[0] // 4))
    return u.T @ op @ u.conj()


def effective_hamiltonian(cfg: SchemeConfig, space: Optional[HilbertSpace] = None) -> np.ndarray:
    """Dressed-basis cooling Hamiltonian, rotated back to the bare basis.

    Asymmetric: H_f + H_EIT + H_Stark, which omits the b-Y block of the
    magnetic coupling (see ``asymmetric_residual_coupling``).  Symmetric:
    H_0^s + H_Stark + H'_Stark, identical to the bare model.
    """
    space = _space(cfg, space)
    if cfg.kind not in (SchemeKind.ASYMMETRIC, SchemeKind.SYMMETRIC):
        raise ConfigError("effective Hamiltonian only exists for the four-level schemes")
    basis = dressed_basis(cfg.kind)
    e = {lab: np.eye(4, dtype=complex)[i] for i, lab in enumerate(basis.labels)}
    n_f = space.fock_dim
    a = annihilation(n_f)
    x = a + a.conj().T
    idf = np.eye(n_f)
    num = number(n_f)
    s2, s6 = np.sqrt(2.0), np.sqrt(6.0)
    A = e["A2"]
    if cfg.kind is SchemeKind.ASYMMETRIC:
        free = -cfg.Delta_minus * np.outer(A, A)
        eit = s6 * cfg.Omega / 4 * sigma_x(A, e["b"])
        stark = -cfg.Omega_g * np.outer(e["Y"], e["Y"]) + s2 * cfg.Omega / 4 * sigma_x(A, e["Y"])
        internal = free + eit + stark
        coupling = s2 / 2 * sigma_x(e["b"], e["d"]) + s6 / 6 * sigma_x(e["d"], e["Y"])
    else:
        B, D, Z = e["B"], e["D"], e["0"]
        stark = -cfg.Delta * (np.outer(A, A) - np.outer(B, B)) + s2 * cfg.Omega / 2 * sigma_x(A, B)
        stark2 = (cfg.Delta_g * np.outer(Z, Z) - cfg.Delta * np.outer(B, B)) + s2 * cfg.Omega_g / 2 * sigma_x(Z, B)
        internal = stark + stark2
        coupling = sigma_x(B, D)
    h_dressed = np.kron(internal, idf) + cfg.omega_k * np.kron(np.eye(4), num) + cfg.lam * np.kron(coupling, x)
    h = from_dressed(h_dressed, basis)
    assert_hermitian(h, name="effective Hamiltonian")
    return h


def asymmetric_residual_coupling(cfg: SchemeConfig, space: Optional[HilbertSpace] = None) -> np.ndarray:
    """lambda (a+a^dag)[(|Y><Y| - |b><b|)/2 + sigma_x^{b,Y}/sqrt(12)] in the bare basis.

    This is exactly bare_hamiltonian - effective_hamiltonian for the
    asymmetric scheme.
    """
    space = _space(cfg, space)
    basis = dressed_basis(SchemeKind.ASYMMETRIC)
    b, y = basis.ket("b"), basis.ket("Y")
    pattern = 0.5 * (np.outer(y, y.conj()) - np.outer(b, b.conj())) + sigma_x(b, y) / np.sqrt(12.0)
    a = annihilation(space.fock_dim)
    return cfg.lam * np.kron(pattern, a + a.conj().T)


# --- dissipators ----------------------------------------------------------

def dissipators(cfg: SchemeConfig, space: Optional[HilbertSpace] = None) -> list:
    """(rate, jump) pairs: |i><A2| at Gamma_i, then b at (N+1) gamma_k and b^dag at N gamma_k."""
    space = _space(cfg, space)
    out = [(rate, space.internal_op(o)) for rate, o in internal_jumps(cfg)]
    if cfg.gamma_k > 0:
        b = space.phonon_op(annihilation(space.fock_dim))
        out.append(((cfg.n_thermal + 1) * cfg.gamma_k, b))
        if cfg.n_thermal > 0:
            out.append((cfg.n_thermal * cfg.gamma_k, b.conj().T))
    for rate, _ in out:
        if rate < 0:
            raise ConfigError(f"negative dissipation rate {rate}")
    return out


# --- dark states and ansatz -----------------------------------------------

def dark_state(cfg: SchemeConfig) -> np.ndarray:
    if cfg.kind is SchemeKind.ASYMMETRIC:
        return dressed_basis(cfg.kind).ket("d").copy()
    if cfg.kind is SchemeKind.SYMMETRIC:
        return dressed_basis(cfg.kind).ket("D").copy()
    raise ConfigError(f"{cfg.kind.value} scheme has no dark state")


def _ansatz_parts(cfg: SchemeConfig):
    """(dark, first-order internal ket, leak internal ket, analytic residual)."""
    eta, w = cfg.eta, cfg.omega_k
    if cfg.kind is SchemeKind.ASYMMETRIC:
        basis = dressed_basis(cfg.kind)
        first = -eta / np.sqrt(2.0) * (basis.ket("b") - np.sqrt(3.0) * basis.ket("Y"))
        residual = np.sqrt(1.5) * eta * (4 * w / 3 - cfg.Omega_g)
        return basis.ket("d"), first, basis.ket("Y"), residual
    if cfg.kind is SchemeKind.SYMMETRIC:
        if cfg.Omega_g == 0:
            raise ConfigError("symmetric ansatz is undefined for Omega_g = 0")
        basis = dressed_basis(cfg.kind)
        c = np.sqrt(2.0) * eta * w / cfg.Omega_g
        first = -c * basis.ket("0")
        residual = -c * (w + cfg.Delta_g)
        return basis.ket("D"), first, basis.ket("0"), residual
    raise ConfigError(f"{cfg.kind.value} scheme has no steady-state ansatz")


def _ansatz_unnormalized(cfg: SchemeConfig, space: HilbertSpace) -> np.ndarray:
    dark, first, _, _ = _ansatz_parts(cfg)
    n_f = space.fock_dim
    return np.kron(dark, np.eye(n_f)[0]) + np.kron(first, np.eye(n_f)[1])


def ansatz_steady_state(cfg: SchemeConfig, space: Optional[HilbertSpace] = None) -> np.ndarray:
    """First-order-in-eta steady state |dark>|0> + eta-correction |1>, normalized."""
    space = _space(cfg, space)
    psi = _ansatz_unnormalized(cfg, space).astype(complex)
    return psi / np.linalg.norm(psi)


def leak_ket(cfg: SchemeConfig, space: Optional[HilbertSpace] = None) -> np.ndarray:
    """|Y>|1> (asymmetric) or |0>|1> (symmetric)."""
    space = _space(cfg, space)
    _, _, leak, _ = _ansatz_parts(cfg)
    return np.kron(leak, np.eye(space.fock_dim)[1]).astype(complex)


def analytic_gate_residual(cfg: SchemeConfig) -> float:
    return float(_ansatz_parts(cfg)[3])


def gate_point_residual(cfg: SchemeConfig) -> float:
    """Coefficient of the leak ket in H_eff applied to the (unnormalized) ansatz.

    Evaluated by an explicit matrix-vector product; vanishes at the gate
    point 3 Omega_g = 4 omega_k (asymmetric) or Delta_g = -omega_k (symmetric).
    """
    space = HilbertSpace(3)
    h = effective_hamiltonian(cfg, space)
    phi = _ansatz_unnormalized(cfg, space)
    return float(np.real(np.vdot(leak_ket(cfg, space), h @ phi)))


def leakage_remainder(cfg: SchemeConfig, hamiltonian: str = "bare", fock_dim: int = 4) -> float:
    """Norm of H|ansatz> once the leading leak term is removed (unnormalized ansatz).

    ``hamiltonian`` selects "bare" (exact coupling) or "effective".
    """
    space = HilbertSpace(fock_dim)
    if hamiltonian == "bare":
        h = bare_hamiltonian(cfg, space)
    elif hamiltonian == "effective":
        h = effective_hamiltonian(cfg, space)
    else:
        raise ValueError(f"unknown hamiltonian {hamiltonian!r}")
    phi = _ansatz_unnormalized(cfg, space)
    out = h @ phi - analytic_gate_residual(cfg) * leak_ket(cfg, space)
    return float(np.linalg.norm(out))
