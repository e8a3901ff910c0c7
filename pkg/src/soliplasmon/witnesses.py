"""EPR steering witnesses evaluated on density matrices and along trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import DensityMatrix, EvolutionConfig, iter_evolve
from .fock import TwoModeSpace, dagger
from .model import ModelParams, SplitHamiltonian, StateVector, mode_operators

__all__ = [
    "IMAG_TOL",
    "WitnessSample",
    "WitnessTrace",
    "n_mode_witness",
    "two_mode_witnesses",
    "witness_trace",
]

#: Largest imaginary residue tolerated on a witness before it is cast to real.
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class WitnessSample:
    t: float
    zeta_ab: float
    zeta_ba: float
    n_a: float
    n_b: float
    raw_trace_magnitude: float


@dataclass
class WitnessTrace:
    """Columnar record of witness samples.

    ``zeta_ab > 0`` certifies that mode a steers mode b, ``zeta_ba > 0`` the
    reverse.
    """

    t: np.ndarray
    zeta_ab: np.ndarray
    zeta_ba: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    raw_trace: np.ndarray
    params: ModelParams | None = None
    initial_state_tag: str = ""

    def __post_init__(self):
        n = len(self.t)
        for name in ("zeta_ab", "zeta_ba", "n_a", "n_b", "raw_trace"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> WitnessSample:
        return WitnessSample(float(self.t[i]), float(self.zeta_ab[i]), float(self.zeta_ba[i]),
                             float(self.n_a[i]), float(self.n_b[i]), float(self.raw_trace[i]))

    @property
    def samples(self) -> list[WitnessSample]:
        return [self[i] for i in range(len(self))]

    def witness(self, witness_id: str) -> np.ndarray:
        if witness_id == "ab":
            return self.zeta_ab
        if witness_id == "ba":
            return self.zeta_ba
        raise ValueError(f"witness_id must be 'ab' or 'ba', got {witness_id!r}")


@lru_cache(maxsize=32)
def _witness_operators(space: TwoModeSpace) -> np.ndarray:
    ops = mode_operators(space)
    half = 0.5 * ops.identity
    stack = np.stack([
        dagger(ops.a) @ ops.b,          # <a^dag b>
        ops.n_a @ (ops.n_b + half),     # <n_a (n_b + 1/2)>
        ops.n_b @ (ops.n_a + half),     # <n_b (n_a + 1/2)>
        ops.n_a,
        ops.n_b,
    ])
    stack.setflags(write=False)
    return stack


def _moments(rho: np.ndarray, space: TwoModeSpace) -> np.ndarray:
    ops = _witness_operators(space)
    if rho.shape != ops.shape[1:]:
        raise ValueError(f"state shape {rho.shape} does not match space {space}")
    tr = np.trace(rho)
    if tr == 0:
        raise ZeroDivisionError("witness of a state with zero trace")
    return np.einsum("kij,ji->k", ops, rho) / tr


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL:
        raise ValueError(f"{what} has imaginary residue {value.imag:.3e}; state is not physical")
    return float(value.real)


def _witness_values(rho: np.ndarray, space: TwoModeSpace) -> tuple[float, float, float, float]:
    x, ab_rhs, ba_rhs, n_a, n_b = _moments(rho, space)
    # <b^dag a> is the conjugate of <a^dag b> for Hermitian states.
    cross = x * np.conj(x)
    return (
        _real(cross - ab_rhs, "zeta_ab"),
        _real(cross - ba_rhs, "zeta_ba"),
        _real(n_a, "<n_a>"),
        _real(n_b, "<n_b>"),
    )


def two_mode_witnesses(rho, space: TwoModeSpace) -> tuple[float, float]:
    """Return ``(zeta_ab, zeta_ba)``.

    ``zeta_ab = <a^dag b><b^dag a> - <n_a (n_b + 1/2)>`` and ``zeta_ba`` is
    the same with the number operators exchanged.
    """
    r = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    zab, zba, _, _ = _witness_values(r, space)
    return zab, zba


def n_mode_witness(rho, mode_ops: Sequence[np.ndarray], tol: float = 1e-12) -> float:
    """Multimode steering witness ``|<prod_k a_k>|^2 - <n_1 prod_{k>=2} (n_k + 1/2)>``.

    A positive value witnesses steering by the party holding mode 1.  The
    annihilation operators must act on distinct tensor factors of a shared
    space, which is checked numerically.
    """
    r = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    ops = [np.asarray(op, dtype=complex) for op in mode_ops]
    if len(ops) < 2:
        raise ValueError("the multimode witness needs at least two modes")
    if any(op.shape != r.shape for op in ops):
        raise ValueError("mode operators and state must share one space")
    for j in range(len(ops)):
        for k in range(j + 1, len(ops)):
            for other in (ops[k], dagger(ops[k])):
                if np.max(np.abs(ops[j] @ other - other @ ops[j])) > tol:
                    raise ValueError(f"mode operators {j} and {k} do not commute")

    tr = np.trace(r)
    if tr == 0:
        raise ZeroDivisionError("witness of a state with zero trace")
    ident = np.eye(r.shape[0], dtype=complex)
    product = ops[0]
    rhs = dagger(ops[0]) @ ops[0]
    for op in ops[1:]:
        product = product @ op
        rhs = rhs @ (dagger(op) @ op + 0.5 * ident)
    lhs = np.einsum("ij,ji->", product, r) / tr
    value = abs(lhs) ** 2 - np.einsum("ij,ji->", rhs, r) / tr
    return _real(complex(value), "multimode witness")


def witness_trace(
    psi0: StateVector,
    h: SplitHamiltonian,
    cfg: EvolutionConfig,
    *,
    stop: Callable[[WitnessTrace], bool] | None = None,
    check_every: int = 200,
    on_state: Callable[[float, DensityMatrix], None] | None = None,
) -> WitnessTrace:
    """Evolve ``psi0`` and record the witnesses at every sample.

    States are not retained.  ``stop`` is polled every ``check_every``
    samples with the trace collected so far and ends the run early when it
    returns True.  ``on_state`` sees every sampled state, e.g. for
    invariant checks.
    """
    rows: list[tuple[float, ...]] = []

    def snapshot() -> WitnessTrace:
        arr = np.array(rows, dtype=float).reshape(-1, 6)
        return WitnessTrace(*arr.T, params=h.params, initial_state_tag=psi0.label)

    for i, (t, state) in enumerate(iter_evolve(psi0, h, cfg)):
        if on_state is not None:
            on_state(t, state)
        zab, zba, n_a, n_b = _witness_values(state.rho, h.space)
        rows.append((t, zab, zba, n_a, n_b, abs(state.raw_trace)))
        if stop is not None and i and i % check_every == 0 and stop(snapshot()):
            break
    return snapshot()


def traces_from_states(states: Iterable[tuple[float, DensityMatrix]], space: TwoModeSpace,
                       params: ModelParams | None = None, tag: str = "") -> WitnessTrace:
    """Witness trace for an explicit sequence of ``(t, state)`` pairs."""
    rows = []
    for t, state in states:
        zab, zba, n_a, n_b = _witness_values(state.rho, space)
        rows.append((t, zab, zba, n_a, n_b, abs(state.raw_trace)))
    arr = np.array(rows, dtype=float).reshape(-1, 6)
    return WitnessTrace(*arr.T, params=params, initial_state_tag=tag)
