"""Dense operator toolkit: tensor products, ladder operators and solvers.

State ordering is ``internal * fock_dim + phonon`` everywhere, with the
internal levels ordered (|A2>, |+1>, |0>, |-1>).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

INTERNAL_DIM = 4

HERMITIAN_TOL = 1e-12
SOLVE_RESIDUAL_TOL = 1e-10
KERNEL_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class FullRankError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    """Bookkeeping for (4 internal levels) x (truncated Fock space)."""

    fock_dim: int
    internal_dim: int = INTERNAL_DIM

    def __post_init__(self):
        if self.fock_dim < 2:
            raise ValueError(f"fock_dim must be >= 2, got {self.fock_dim}")
        if self.internal_dim != INTERNAL_DIM:
            raise ValueError("internal_dim is fixed to 4")

    @property
    def total_dim(self) -> int:
        return self.internal_dim * self.fock_dim

    def index(self, internal: int, phonon: int) -> int:
        if not (0 <= internal < self.internal_dim and 0 <= phonon < self.fock_dim):
            raise IndexError((internal, phonon))
        return internal * self.fock_dim + phonon

    def split(self, idx: int) -> tuple[int, int]:
        if not 0 <= idx < self.total_dim:
            raise IndexError(idx)
        return divmod(idx, self.fock_dim)

    def internal_op(self, op: np.ndarray) -> np.ndarray:
        """Lift a 4x4 internal operator to the full space."""
        return kron(np.asarray(op, dtype=complex), np.eye(self.fock_dim, dtype=complex))

    def phonon_op(self, op: np.ndarray) -> np.ndarray:
        return kron(np.eye(self.internal_dim, dtype=complex), np.asarray(op, dtype=complex))

    def product_state(self, internal: np.ndarray, phonon: np.ndarray) -> np.ndarray:
        return np.kron(np.asarray(internal, dtype=complex), np.asarray(phonon, dtype=complex))


def _check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``(a (x) b)[i*n+k, j*n+l] = a[i,j] * b[k,l]``."""
    a = _check_square(a, "a")
    b = _check_square(b, "b")
    return np.kron(a, b).astype(complex, copy=False)


def annihilation(n_f: int) -> np.ndarray:
    if n_f < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {n_f}")
    return np.diag(np.sqrt(np.arange(1, n_f, dtype=float)), 1).astype(complex)


def creation(n_f: int) -> np.ndarray:
    return annihilation(n_f).conj().T


def number(n_f: int) -> np.ndarray:
    if n_f < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {n_f}")
    return np.diag(np.arange(n_f, dtype=float)).astype(complex)


def fock(n_f: int, n: int) -> np.ndarray:
    v = np.zeros(n_f, dtype=complex)
    v[n] = 1.0
    return v


def basis_projector(dim: int, i: int, j: int | None = None) -> np.ndarray:
    """|i><j| (or |i><i|) in a ``dim``-dimensional space."""
    out = np.zeros((dim, dim), dtype=complex)
    out[i, i if j is None else j] = 1.0
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def hermiticity_error(a: np.ndarray) -> float:
    """Largest entrywise |A - A^dag| relative to max |A|."""
    a = np.asarray(a)
    scale = np.max(np.abs(a))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)) / scale)


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_error(a) <= tol


def assert_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL, name: str = "operator") -> None:
    err = hermiticity_error(a)
    if err > tol:
        raise ValueError(f"{name} is not Hermitian: relative error {err:.3e} > {tol:.1e}")


def assert_finite(a: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def linear_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``a x = rhs`` by pivoted LU; raise on a numerically singular system."""
    a = _check_square(a, "a")
    rhs = np.asarray(rhs)
    if rhs.shape[0] != a.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match matrix size {a.shape[0]}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < 1e-14 * scale:
        raise SingularMatrixError(
            f"numerically singular system: smallest pivot {pivots.min():.3e} (scale {scale:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs)


def null_vector(a: np.ndarray, tol: float = KERNEL_TOL) -> np.ndarray:
    """Unit vector ``v`` with ``||a v|| <= tol * ||a||`` (right singular vector)."""
    a = _check_square(a, "a")
    _, s, vh = np.linalg.svd(a)
    norm = s[0] if s.size else 0.0
    v = vh[-1].conj()
    if s[-1] > tol * norm:
        raise FullRankError(
            f"matrix has full rank: smallest singular value {s[-1]:.3e} > {tol:.1e} * {norm:.3e}"
        )
    return v / np.linalg.norm(v)


def kernel_dimension(a: np.ndarray, tol: float = KERNEL_TOL) -> int:
    s = np.linalg.svd(_check_square(a, "a"), compute_uv=False)
    if s[0] == 0:
        return len(s)
    return int(np.sum(s <= tol * s[0]))
