"""Non-Hermitian master-equation dynamics with trace normalization.

The density matrix obeys

    d rho / dt = -i [H+, rho] - i {H-, rho}

with ``H+`` Hermitian and ``H-`` anti-Hermitian.  The flow does not
preserve the trace, so states are mapped to ``rho / tr(rho)`` and
expectation values are ``tr(Q rho) / tr(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .fock import TwoModeSpace, as_matrix, dagger, matrix_exponential
from .model import SplitHamiltonian, StateVector

__all__ = [
    "COLLAPSE_TRACE",
    "DensityMatrix",
    "DynamicsError",
    "EvolutionConfig",
    "TimeSeries",
    "evolve",
    "exact_propagator",
    "expectation",
    "iter_evolve",
    "rk4_step",
    "step_rhs",
]

#: Below this trace magnitude the unnormalized state is treated as collapsed.
COLLAPSE_TRACE = 1e-14

# Budget, in complex entries, for tabulating the one-step RK4 maps of all
# block pairs as dense superoperators (2**22 entries is 64 MiB).
_SUPEROP_MAX_ENTRIES = 2**22


class DynamicsError(RuntimeError):
    """The trajectory left the regime where the normalization mapping is defined."""


@dataclass(frozen=True)
class DensityMatrix:
    """A state on ``space``.

    ``raw_trace`` is the trace the state would carry without any
    normalization, i.e. the accumulated gain or loss of the non-unitary flow
    since the initial state.
    """

    space: TwoModeSpace
    rho: np.ndarray
    raw_trace: complex = 1.0 + 0.0j

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        return cls(psi.space, psi.density_matrix(), complex(1.0))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - dagger(self.rho))))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + dagger(self.rho))
        return float(np.linalg.eigvalsh(herm)[0] / self.trace.real)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 1e-3
    t_max: float = 50.0
    sample_stride: int = 10
    renormalize_each_step: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt!r}")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max!r}")
        if isinstance(self.sample_stride, bool) or not isinstance(self.sample_stride, (int, np.integer)) \
                or self.sample_stride < 1:
            raise ValueError(f"sample_stride must be a positive integer, got {self.sample_stride!r}")
        if self.t_max / self.dt > np.iinfo(np.int64).max // 2:
            raise ValueError("t_max / dt does not fit in the integer step counter")

    @property
    def n_steps(self) -> int:
        # Tolerate t_max values that are an integer multiple of dt up to rounding.
        return int(math.floor(self.t_max / self.dt + 1e-9))

    @property
    def sample_dt(self) -> float:
        return self.dt * self.sample_stride

    def replace(self, **changes) -> "EvolutionConfig":
        values = dict(dt=self.dt, t_max=self.t_max, sample_stride=self.sample_stride,
                      renormalize_each_step=self.renormalize_each_step)
        values.update(changes)
        return EvolutionConfig(**values)


@dataclass
class TimeSeries:
    """Uniformly sampled trajectory: ``times[k]`` belongs to ``states[k]``."""

    times: np.ndarray
    states: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def rhos(self) -> np.ndarray:
        return np.stack([s.rho for s in self.states])

    @property
    def raw_traces(self) -> np.ndarray:
        return np.array([s.raw_trace for s in self.states])


def _as_rho(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.rho
    return as_matrix(rho)


def step_rhs(rho, h: SplitHamiltonian) -> np.ndarray:
    """Right-hand side ``-i[H+, rho] - i{H-, rho}`` for an arbitrary matrix ``rho``."""
    r = _as_rho(rho)
    hp, hm = h.h_plus, h.h_minus
    if r.shape != hp.shape:
        raise ValueError(f"state shape {r.shape} does not match Hamiltonian {hp.shape}")
    return -1j * (hp @ r - r @ hp) - 1j * (hm @ r + r @ hm)


def _hermitian_rhs(r: np.ndarray, h_full: np.ndarray) -> np.ndarray:
    # For Hermitian r the flow equals -i(H r - (H r)^dag); the result is
    # Hermitian to the last bit.
    x = h_full @ r
    return -1j * (x - dagger(x))


def _invariant_blocks(h_full: np.ndarray) -> tuple[np.ndarray, list[tuple[slice, np.ndarray]]]:
    """Group basis states into the connected components of the coupling graph of ``H``.

    Returns the permutation that makes each component contiguous and the
    diagonal blocks of the permuted ``H``.  Entries of ``H`` outside these
    blocks are exactly zero, so the blocks carry the whole generator.
    """
    pattern = csr_matrix(h_full != 0)
    _, labels = connected_components(pattern, directed=False)
    perm = np.argsort(labels, kind="stable")
    cuts = np.concatenate(([0], np.flatnonzero(np.diff(labels[perm])) + 1, [len(perm)]))
    blocks = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        idx = perm[lo:hi]
        blocks.append((slice(lo, hi), h_full[np.ix_(idx, idx)]))
    return perm, blocks


def _blocked_rhs(r: np.ndarray, blocks) -> np.ndarray:
    # _hermitian_rhs with H applied one invariant block of rows at a time.
    x = np.empty_like(r)
    for rows, hb in blocks:
        x[rows] = hb @ r[rows]
    return -1j * (x - dagger(x))


def rk4_step(rho, h: SplitHamiltonian, dt: float) -> np.ndarray:
    """One classic fourth-order Runge-Kutta step of :func:`step_rhs` (no normalization)."""
    r = _as_rho(rho)
    k1 = step_rhs(r, h)
    k2 = step_rhs(r + 0.5 * dt * k1, h)
    k3 = step_rhs(r + 0.5 * dt * k2, h)
    k4 = step_rhs(r + dt * k3, h)
    return r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_superoperator(h_left: np.ndarray, h_right: np.ndarray, dt: float) -> np.ndarray:
    """One-step RK4 map for ``X' = -i (h_left X - X h_right^dag)`` on row-major ``vec(X)``.

    For an autonomous linear flow ``vec(X)' = L vec(X)`` the four RK4
    stages combine to exactly ``sum_{k<=4} (dt L)^k / k!``.  With
    ``h_left = h_right = H`` this is the full master-equation step.
    """
    h_left = as_matrix(h_left)
    h_right = as_matrix(h_right)
    # vec(A X) = (A (x) I) vec(X);  vec(X B) = (I (x) B^T) vec(X), and (H^dag)^T = conj(H)
    lin = -1j * (np.kron(h_left, np.eye(h_right.shape[0])) - np.kron(np.eye(h_left.shape[0]), np.conj(h_right)))
    step = np.eye(lin.shape[0], dtype=complex)
    term = np.eye(lin.shape[0], dtype=complex)
    for k in range(1, 5):
        term = (dt / k) * (lin @ term)
        step = step + term
    return step


def _check_trace(tr: complex, t: float) -> None:
    if not np.isfinite(tr):
        raise DynamicsError(f"non-finite trace at t={t:g}")
    if abs(tr) < COLLAPSE_TRACE:
        raise DynamicsError(f"trace collapsed to {abs(tr):.3e} at t={t:g}")


def _active_blocks(psi0: StateVector, h: SplitHamiltonian):
    """Invariant blocks of ``H`` that the initial state touches.

    Returns the kept basis indices (block by block) and the blocks
    re-indexed into that compact ordering.  Density-matrix entries outside
    the kept blocks start at zero and stay exactly zero under the flow.
    """
    perm, blocks = _invariant_blocks(h.full)
    amps = psi0.amplitudes[perm]
    keep, active, offset = [], [], 0
    for rows, hb in blocks:
        if np.any(amps[rows] != 0):
            size = rows.stop - rows.start
            keep.append(perm[rows])
            active.append((slice(offset, offset + size), hb))
            offset += size
    return np.concatenate(keep), active


def iter_evolve(psi0: StateVector, h: SplitHamiltonian, cfg: EvolutionConfig) -> Iterator[tuple[float, DensityMatrix]]:
    """Yield ``(t, state)`` every ``cfg.sample_stride`` RK4 steps, starting at ``t = 0``.

    ``H`` is split into invariant blocks (for the soliplasmon model, the
    sectors of fixed ``n_a + n_b``) and only blocks reached by the initial
    state are integrated.  When the block pairs are small enough, each
    pair's one-step RK4 map is tabulated and raised to the stride power;
    because the renormalization is a scalar rescaling of a linear flow it
    is applied once per recorded sample there, which yields the same
    normalized states as rescaling after every step.  Otherwise the RK4
    stages are evaluated matrix-wise and the state is renormalized after
    each step.

    Raises
    ------
    DynamicsError
        On trace collapse (``|tr rho| < 1e-14``) or non-finite entries.
    """
    if psi0.space != h.space:
        raise ValueError("initial state and Hamiltonian live on different spaces")
    d = h.space.total_dim
    rho = psi0.density_matrix()
    cumulative = complex(np.trace(rho))
    yield 0.0, DensityMatrix(h.space, rho.copy(), cumulative)

    keep, blocks = _active_blocks(psi0, h)
    rho = rho[np.ix_(keep, keep)]
    n_samples = cfg.n_steps // cfg.sample_stride

    def embed(sub: np.ndarray) -> DensityMatrix:
        full = np.zeros((d, d), dtype=complex)
        full[np.ix_(keep, keep)] = sub
        return DensityMatrix(h.space, full, cumulative)

    sizes = [rows.stop - rows.start for rows, _ in blocks]
    table_entries = sum((si * sj) ** 2 for i, si in enumerate(sizes) for sj in sizes[i:])
    if table_entries <= _SUPEROP_MAX_ENTRIES:
        # Upper-triangle block pairs only; the lower ones are their adjoints.
        # Each pair reads and writes only its own block, so updating rho in
        # place is safe.
        pairs = []
        for i, (ri, hi) in enumerate(blocks):
            for rj, hj in blocks[i:]:
                step = np.linalg.matrix_power(_rk4_superoperator(hi, hj, cfg.dt), cfg.sample_stride)
                pairs.append((ri, rj, step))
        for k in range(1, n_samples + 1):
            t = k * cfg.sample_dt
            with np.errstate(over="ignore", invalid="ignore"):
                for ri, rj, step in pairs:
                    blk = (step @ rho[ri, rj].reshape(-1)).reshape(ri.stop - ri.start, rj.stop - rj.start)
                    if ri == rj:
                        # exact in exact arithmetic; stops roundoff drift off the Hermitian part
                        blk = 0.5 * (blk + dagger(blk))
                    else:
                        rho[rj, ri] = dagger(blk)
                    rho[ri, rj] = blk
            tr = complex(np.trace(rho))
            _check_trace(tr, t)
            if not np.all(np.isfinite(rho)):
                raise DynamicsError(f"non-finite density matrix at t={t:g}")
            if cfg.renormalize_each_step:
                cumulative *= tr
                rho = rho / tr
            else:
                cumulative = tr
            yield t, embed(rho)
        return

    dt = cfg.dt
    step = 0
    for k in range(1, n_samples + 1):
        for _ in range(cfg.sample_stride):
            step += 1
            with np.errstate(over="ignore", invalid="ignore"):
                k1 = _blocked_rhs(rho, blocks)
                k2 = _blocked_rhs(rho + 0.5 * dt * k1, blocks)
                k3 = _blocked_rhs(rho + 0.5 * dt * k2, blocks)
                k4 = _blocked_rhs(rho + dt * k3, blocks)
                rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            tr = complex(np.trace(rho))
            _check_trace(tr, step * dt)
            if cfg.renormalize_each_step:
                cumulative *= tr
                rho = rho / tr
            else:
                cumulative = tr
        if not np.all(np.isfinite(rho)):
            raise DynamicsError(f"non-finite density matrix at t={k * cfg.sample_dt:g}")
        yield k * cfg.sample_dt, embed(rho)


def evolve(psi0: StateVector, h: SplitHamiltonian, cfg: EvolutionConfig) -> TimeSeries:
    """Integrate from ``|psi0><psi0|`` and collect every sampled state."""
    times, states = [], []
    for t, state in iter_evolve(psi0, h, cfg):
        times.append(t)
        states.append(state)
    return TimeSeries(np.array(times), states)


def exact_propagator(psi0: StateVector, h: SplitHamiltonian, t: float) -> DensityMatrix:
    """Closed-form solution ``M rho0 M^dag / tr(...)`` with ``M = exp(-i H t)``."""
    if psi0.space != h.space:
        raise ValueError("initial state and Hamiltonian live on different spaces")
    m = matrix_exponential(-1j * t * h.full)
    rho = m @ psi0.density_matrix() @ dagger(m)
    tr = complex(np.trace(rho))
    _check_trace(tr, t)
    return DensityMatrix(h.space, rho / tr, tr)


def expectation(rho, q) -> complex:
    """``tr(q rho) / tr(rho)``; valid for raw as well as normalized states."""
    r = _as_rho(rho)
    q = np.asarray(q)
    if q.shape != r.shape:
        raise ValueError(f"operator shape {q.shape} does not match state {r.shape}")
    tr = np.trace(r)
    if tr == 0:
        raise ZeroDivisionError("expectation of a state with zero trace")
    return complex(np.einsum("ij,ji->", q, r) / tr)
