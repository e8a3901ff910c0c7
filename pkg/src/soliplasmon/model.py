"""Soliton-plasmon Hamiltonian, its Hermitian/anti-Hermitian split, and initial states."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import (
    TwoModeSpace,
    annihilation,
    dagger,
    diag_sqrt,
    is_anti_hermitian,
    is_hermitian,
    kron,
    number,
)

__all__ = [
    "ModelParams",
    "ModeOperators",
    "SplitHamiltonian",
    "StateVector",
    "TruncationWarning",
    "build_hamiltonian",
    "coherent_state",
    "fock_state",
    "mode_operators",
]


class TruncationWarning(UserWarning):
    """A truncated coherent state lost more norm than the tolerated deficit."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants in units of the resonance frequency.

    The exchange couplings are ``g_ab = kappa * g`` (term ``a b^dag``) and
    ``g_ba = g`` (term ``sqrt(n_a) a^dag b``).
    """

    omega: float = 1.0
    U: float = -0.01
    g: float = 0.1
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("omega", "U", "g", "kappa"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")

    @property
    def g_ab(self) -> float:
        return self.kappa * self.g

    @property
    def g_ba(self) -> float:
        return self.g

    def replace(self, **changes) -> "ModelParams":
        values = {"omega": self.omega, "U": self.U, "g": self.g, "kappa": self.kappa}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class ModeOperators:
    """Ladder and number operators embedded in a two-mode space."""

    a: np.ndarray
    b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    identity: np.ndarray


@lru_cache(maxsize=32)
def mode_operators(space: TwoModeSpace) -> ModeOperators:
    """Two-mode operators for ``space``; cached, so treat the arrays as read-only."""
    ia = np.eye(space.cutoff_a, dtype=complex)
    ib = np.eye(space.cutoff_b, dtype=complex)
    a = kron(annihilation(space.cutoff_a), ib)
    b = kron(ia, annihilation(space.cutoff_b))
    ops = ModeOperators(
        a=a,
        b=b,
        n_a=kron(number(space.cutoff_a), ib),
        n_b=kron(ia, number(space.cutoff_b)),
        identity=np.eye(space.total_dim, dtype=complex),
    )
    for arr in (ops.a, ops.b, ops.n_a, ops.n_b, ops.identity):
        arr.setflags(write=False)
    return ops


@dataclass(frozen=True)
class SplitHamiltonian:
    h_plus: np.ndarray
    h_minus: np.ndarray
    space: TwoModeSpace
    params: ModelParams | None = None

    def __post_init__(self):
        d = self.space.total_dim
        if self.h_plus.shape != (d, d) or self.h_minus.shape != (d, d):
            raise ValueError("Hamiltonian parts do not match the space dimension")
        if not is_hermitian(self.h_plus, 1e-12):
            raise ValueError("h_plus is not Hermitian")
        if not is_anti_hermitian(self.h_minus, 1e-12):
            raise ValueError("h_minus is not anti-Hermitian")

    @property
    def full(self) -> np.ndarray:
        return self.h_plus + self.h_minus

    @classmethod
    def from_matrix(cls, h, space: TwoModeSpace, params: ModelParams | None = None):
        h = np.asarray(h, dtype=complex)
        hd = dagger(h)
        return cls(0.5 * (h + hd), 0.5 * (h - hd), space, params)

    def hermitianized(self) -> "SplitHamiltonian":
        """Copy with the anti-Hermitian part set to zero."""
        return SplitHamiltonian(self.h_plus, np.zeros_like(self.h_minus), self.space, self.params)


def _hamiltonian_matrix(params: ModelParams, space: TwoModeSpace) -> np.ndarray:
    ops = mode_operators(space)
    a, b = ops.a, ops.b
    ad, bd = dagger(a), dagger(b)
    # Kerr term a^dag a^dag a a is diagonal: n_a (n_a - 1).
    kerr = ops.n_a @ (ops.n_a - ops.identity)
    return (
        params.omega * ops.n_a
        + params.omega * ops.n_b
        + params.U * kerr
        + params.g_ab * (a @ bd)
        + params.g_ba * (diag_sqrt(ops.n_a) @ ad @ b)
    )


def build_hamiltonian(params: ModelParams, space: TwoModeSpace) -> SplitHamiltonian:
    """Assemble the soliplasmon Hamiltonian and split it into ``H+`` and ``H-``."""
    if space.cutoff_a < 2 or space.cutoff_b < 2:
        raise ValueError("both cutoffs must be at least 2 to hold an exchanged quantum")
    return SplitHamiltonian.from_matrix(_hamiltonian_matrix(params, space), space, params)


@dataclass(frozen=True)
class StateVector:
    space: TwoModeSpace
    amplitudes: np.ndarray
    label: str = ""
    norm_deficit: float = field(default=0.0, compare=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.total_dim,):
            raise ValueError(f"expected {self.space.total_dim} amplitudes, got shape {amps.shape}")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError("state vector is not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, np.conj(self.amplitudes))


def fock_state(space: TwoModeSpace, n_a: int, n_b: int) -> StateVector:
    amps = np.zeros(space.total_dim, dtype=complex)
    amps[space.index(n_a, n_b)] = 1.0
    return StateVector(space, amps, label=f"fock({n_a},{n_b})")


def coherent_cutoff(alpha: complex) -> int:
    """Smallest cutoff accepted by the coherent-state leakage guard."""
    r = abs(alpha)
    return math.ceil(r * r + 6 * r + 10)


def coherent_state(
    space: TwoModeSpace,
    alpha: complex,
    mode: str = "a",
    *,
    allow_truncation: bool = False,
    deficit_tol: float = 1e-10,
) -> StateVector:
    """Truncated coherent state ``|alpha>`` in one mode, vacuum in the other.

    The single-mode expansion is renormalized after truncation.  The
    pre-renormalization norm deficit is stored on the returned state and a
    :class:`TruncationWarning` is issued when it exceeds ``deficit_tol``.

    Parameters
    ----------
    allow_truncation
        Skip the cutoff guard ``cutoff >= ceil(|alpha|^2 + 6|alpha| + 10)``.
    """
    if mode not in ("a", "b"):
        raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")
    cutoff = space.cutoff_a if mode == "a" else space.cutoff_b
    needed = coherent_cutoff(alpha)
    if cutoff < needed and not allow_truncation:
        raise ValueError(
            f"cutoff {cutoff} for mode {mode} is below the leakage guard {needed} "
            f"for |alpha|={abs(alpha):g}; pass allow_truncation=True to override"
        )
    alpha = complex(alpha)
    n = np.arange(cutoff)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        single = (n == 0).astype(complex)
    else:
        mag = np.exp(-0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * log_fact)
        single = mag * np.exp(1j * n * np.angle(alpha))
    norm = float(np.linalg.norm(single))
    deficit = 1.0 - norm * norm
    if deficit > deficit_tol:
        warnings.warn(
            f"coherent state alpha={alpha} truncated at {cutoff} levels loses {deficit:.3e} of its norm",
            TruncationWarning,
            stacklevel=2,
        )
    single = single / norm
    vac = np.zeros(space.cutoff_b if mode == "a" else space.cutoff_a, dtype=complex)
    vac[0] = 1.0
    amps = np.kron(single, vac) if mode == "a" else np.kron(vac, single)
    return StateVector(space, amps, label=f"coherent({alpha.real:g}{alpha.imag:+g}j,{mode})",
                       norm_deficit=max(deficit, 0.0))
