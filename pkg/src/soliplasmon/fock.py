"""Dense complex-matrix helpers and bosonic ladder operators on truncated Fock spaces.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Two-mode
operators use the convention that mode *a* is the left Kronecker factor, so
the basis state ``|i_a, i_b>`` sits at composite index ``i_a * cutoff_b + i_b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAX_KRON_DIM",
    "MatrixExponentialError",
    "TwoModeSpace",
    "annihilation",
    "as_matrix",
    "creation",
    "dagger",
    "diag_sqrt",
    "is_anti_hermitian",
    "is_hermitian",
    "kron",
    "matrix_exponential",
    "number",
]

#: Largest dimension a Kronecker product is allowed to produce.
MAX_KRON_DIM = 4096


class MatrixExponentialError(ArithmeticError):
    """Raised when the scaling-and-squaring exponential cannot produce a finite result."""


def as_matrix(m) -> np.ndarray:
    """Validate ``m`` as a non-empty square matrix and return it as complex128."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {arr.shape}")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def is_hermitian(m, tol: float = 1e-12) -> bool:
    m = as_matrix(m)
    return bool(np.max(np.abs(m - dagger(m))) <= tol)


def is_anti_hermitian(m, tol: float = 1e-12) -> bool:
    m = as_matrix(m)
    return bool(np.max(np.abs(m + dagger(m))) <= tol)


@dataclass(frozen=True)
class TwoModeSpace:
    """Index layout of the truncated two-mode space (mode a is the slow index)."""

    cutoff_a: int
    cutoff_b: int

    def __post_init__(self):
        for name in ("cutoff_a", "cutoff_b"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def total_dim(self) -> int:
        return self.cutoff_a * self.cutoff_b

    def index(self, n_a: int, n_b: int) -> int:
        if not (0 <= n_a < self.cutoff_a and 0 <= n_b < self.cutoff_b):
            raise IndexError(
                f"|{n_a},{n_b}> lies outside the truncation ({self.cutoff_a}, {self.cutoff_b})"
            )
        return n_a * self.cutoff_b + n_b

    def levels(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.total_dim:
            raise IndexError(f"composite index {index} out of range [0, {self.total_dim})")
        return divmod(index, self.cutoff_b)


def annihilation(cutoff: int) -> np.ndarray:
    """Truncated lowering operator with ``a[n, n+1] = sqrt(n+1)``."""
    if isinstance(cutoff, bool) or not isinstance(cutoff, (int, np.integer)) or cutoff < 1:
        raise ValueError(f"cutoff must be a positive integer, got {cutoff!r}")
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)


def creation(cutoff: int) -> np.ndarray:
    return dagger(annihilation(cutoff))


def number(cutoff: int) -> np.ndarray:
    """``a^dag a`` built directly as ``diag(0, 1, ..., cutoff-1)`` (exact integers)."""
    annihilation(cutoff)  # validates cutoff
    return np.diag(np.arange(cutoff, dtype=float)).astype(complex)


def kron(a, b, max_dim: int = MAX_KRON_DIM) -> np.ndarray:
    """Kronecker product ``a (x) b`` with ``a`` as the left (slow-index) factor."""
    a = as_matrix(a)
    b = as_matrix(b)
    dim = a.shape[0] * b.shape[0]
    if dim > max_dim:
        raise ValueError(f"Kronecker product dimension {dim} exceeds the limit {max_dim}")
    return np.kron(a, b)


def diag_sqrt(m, tol: float = 1e-12) -> np.ndarray:
    """Square root of a diagonal matrix with non-negative real diagonal."""
    m = as_matrix(m)
    d = np.diag(m)
    if np.max(np.abs(m - np.diag(d))) > tol:
        raise ValueError("diag_sqrt requires a diagonal matrix")
    if np.max(np.abs(d.imag)) > tol or np.min(d.real) < -tol:
        raise ValueError("diag_sqrt requires a real, non-negative diagonal")
    return np.diag(np.sqrt(np.clip(d.real, 0.0, None))).astype(complex)


# Degree-13 diagonal Pade coefficients and the 1-norm bound below which the
# approximant reaches double precision without scaling.
_PADE13 = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
])
_THETA13 = 5.371920351148152
_MAX_SQUARINGS = 64


def matrix_exponential(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Pade approximant.

    The input is scaled by ``2**-s`` so that its 1-norm is below the Pade
    error bound, the rational approximant is evaluated, and the result is
    squared ``s`` times.

    Raises
    ------
    MatrixExponentialError
        If the input is not finite, the required number of squarings is
        unreasonable, or the result overflows.
    """
    a = as_matrix(m)
    if not np.all(np.isfinite(a)):
        raise MatrixExponentialError("matrix_exponential input contains non-finite entries")
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = 0
    if norm > _THETA13:
        s = int(np.ceil(np.log2(norm / _THETA13)))
    if s > _MAX_SQUARINGS:
        raise MatrixExponentialError(f"norm {norm:.3e} needs {s} squarings; refusing")
    a = a / 2.0**s

    b = _PADE13
    ident = np.eye(n, dtype=complex)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    try:
        r = np.linalg.solve(v - u, v + u)
    except np.linalg.LinAlgError as exc:
        raise MatrixExponentialError("Pade denominator is singular") from exc
    for _ in range(s):
        r = r @ r
    if not np.all(np.isfinite(r)):
        raise MatrixExponentialError("matrix exponential overflowed")
    return r
