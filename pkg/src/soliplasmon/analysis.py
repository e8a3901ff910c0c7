"""Witnessing periods, kappa sweeps, and the odd-power period law fit."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.signal import find_peaks

from .dynamics import EvolutionConfig
from .fock import TwoModeSpace
from .model import ModelParams, build_hamiltonian, fock_state
from .witnesses import WitnessTrace, witness_trace

__all__ = [
    "DEFAULT_THRESHOLD",
    "WORKERS_ENV",
    "FitCoefficients",
    "PeriodEstimate",
    "SweepResult",
    "SweepRow",
    "detect_periods",
    "fit_period_law",
    "period_law_basis",
    "sweep_kappa",
    "sweep_t_max",
    "worker_count",
]

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-6
#: Environment variable that caps the sweep worker pool.
WORKERS_ENV = "SOLIPLASMON_WORKERS"


@dataclass(frozen=True)
class PeriodEstimate:
    witness_id: str
    t_start: float
    t_end: float
    peak_value: float
    peak_time: float
    merged_lobes: bool = False

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def to_dict(self) -> dict:
        return {
            "witness_id": self.witness_id,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "duration": self.duration,
            "peak_value": self.peak_value,
            "peak_time": self.peak_time,
            "merged_lobes": self.merged_lobes,
        }


def _zero_edge(t: np.ndarray, z: np.ndarray, i: int, step: int) -> float | None:
    """Walk from the threshold crossing at ``i`` towards lower values and locate the edge.

    The edge is the interpolated zero crossing, or the local minimum when
    the witness only touches zero between samples.  Returns None when the
    walk runs off the trace while still descending.
    """
    n = len(z)
    j = i
    while True:
        k = j + step
        if k < 0 or k >= n:
            # Reaching t = 0 from a zero-valued start is a genuine edge.
            return float(t[j]) if j == 0 else None
        if z[k] <= 0.0:
            return float(t[k] + (t[j] - t[k]) * (0.0 - z[k]) / (z[j] - z[k]))
        if z[k] > z[j]:
            return _vertex(t, z, j)
        j = k


def _vertex(t: np.ndarray, z: np.ndarray, j: int) -> float:
    """Time of the parabolic minimum through samples ``j-1, j, j+1``."""
    if j == 0 or j == len(z) - 1:
        return float(t[j])
    curv = z[j - 1] - 2.0 * z[j] + z[j + 1]
    if curv <= 0:
        return float(t[j])
    h = t[j + 1] - t[j]
    shift = 0.5 * (z[j - 1] - z[j + 1]) / curv
    return float(t[j] + h * np.clip(shift, -0.5, 0.5))


def detect_periods(trace: WitnessTrace, witness_id: str, threshold: float = DEFAULT_THRESHOLD) -> list[PeriodEstimate]:
    """Find the witnessing periods of ``zeta_<witness_id>``.

    An excursion is a maximal run of samples above ``threshold`` whose peak
    reaches ``10 * threshold``.  Its edges are pushed outward to where the
    witness returns to zero, interpolating linearly between the bracketing
    samples, or to the parabolic vertex of the sampled minimum where the
    witness only touches zero.  Two lobes whose sampled dip stays above
    ``threshold`` are reported as one excursion with ``merged_lobes`` set.
    Excursions cut off by either end of the trace are dropped.

    Raises
    ------
    ValueError
        If the trace is empty, the sampling is not uniform, or the
        threshold is not positive.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    t = np.asarray(trace.t, dtype=float)
    z = np.asarray(trace.witness(witness_id), dtype=float)
    if len(t) == 0:
        raise ValueError("empty witness trace")
    if len(t) > 2:
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-12):
            raise ValueError("detect_periods requires uniform sampling")

    above = z > threshold
    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts = list(edges[~above[edges]] + 1)
    ends = list(edges[above[edges]])
    if above[0]:
        starts.insert(0, 0)
    if above[-1]:
        ends.append(len(z) - 1)

    periods = []
    for i0, i1 in zip(starts, ends):
        seg = z[i0:i1 + 1]
        k = int(np.argmax(seg))
        if seg[k] < 10 * threshold:
            continue
        if i0 == 0 or i1 == len(z) - 1:
            log.debug("skipping open %s excursion at t=%g", witness_id, t[i0])
            continue
        t_start = _zero_edge(t, z, i0, -1)
        t_end = _zero_edge(t, z, i1, +1)
        if t_start is None or t_end is None:
            continue
        peaks, _ = find_peaks(np.concatenate(([-np.inf], seg, [-np.inf])), prominence=threshold)
        periods.append(PeriodEstimate(
            witness_id=witness_id,
            t_start=t_start,
            t_end=t_end,
            peak_value=float(seg[k]),
            peak_time=float(t[i0 + k]),
            merged_lobes=len(peaks) > 1,
        ))
    return periods


@dataclass
class SweepRow:
    kappa: float
    T_ba: float | None
    T_ab: float | None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def __post_init__(self):
        ks = [r.kappa for r in self.rows]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("sweep rows must have strictly increasing kappa")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([r.kappa for r in self.rows], dtype=float)

    def column(self, name: str) -> np.ndarray:
        """Period column with absent entries as NaN."""
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows],
                        dtype=float)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be positive, got {n}")
        return n
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def sweep_t_max(kappa: float, t_max: float) -> float:
    """Integration window for one sweep point; grows like 20/kappa for small kappa."""
    return float(max(t_max, 100.0, 20.0 / kappa))


def _first_closed(trace: WitnessTrace, witness_id: str, threshold: float) -> PeriodEstimate | None:
    periods = detect_periods(trace, witness_id, threshold)
    return periods[0] if periods else None


def _sweep_point(args) -> SweepRow:
    params, cfg, threshold, initial, cutoffs, early_stop = args
    diagnostics: dict = {"t_max": cfg.t_max}
    try:
        space = TwoModeSpace(*cutoffs)
        h = build_hamiltonian(params, space)
        psi0 = fock_state(space, *initial)

        def done(tr: WitnessTrace) -> bool:
            return (_first_closed(tr, "ba", threshold) is not None
                    and _first_closed(tr, "ab", threshold) is not None)

        trace = witness_trace(psi0, h, cfg, stop=done if early_stop else None)
        diagnostics["t_stop"] = float(trace.t[-1])
        ba = _first_closed(trace, "ba", threshold)
        ab = _first_closed(trace, "ab", threshold)
        for name, p in (("ba", ba), ("ab", ab)):
            if p is None:
                diagnostics[f"note_{name}"] = f"no closed zeta_{name} excursion within t_max"
                log.warning("kappa=%g: no closed zeta_%s excursion within t_max=%g", params.kappa, name, cfg.t_max)
        return SweepRow(params.kappa, None if ba is None else ba.duration,
                        None if ab is None else ab.duration, diagnostics)
    except Exception as exc:  # recorded per point; the sweep continues
        log.warning("kappa=%g failed: %s", params.kappa, exc)
        diagnostics["error"] = f"{type(exc).__name__}: {exc}"
        return SweepRow(params.kappa, None, None, diagnostics)


def sweep_kappa(
    base: ModelParams,
    kappas: Sequence[float],
    cfg: EvolutionConfig | None = None,
    *,
    threshold: float = DEFAULT_THRESHOLD,
    initial: tuple[int, int] = (1, 0),
    cutoffs: tuple[int, int] = (4, 4),
    workers: int | None = None,
    early_stop: bool = True,
) -> SweepResult:
    """First witnessing periods ``T_ba`` and ``T_ab`` for each coupling asymmetry.

    Every point starts from the Fock state ``initial`` with ``g_ab = kappa g``
    and ``g_ba = g``.  The window per point is :func:`sweep_t_max`; with
    ``early_stop`` a run ends once both first periods are closed.
    Independent points are spread over a process pool of ``workers``
    (default: :func:`worker_count`).
    """
    cfg = cfg or EvolutionConfig()
    ks = np.asarray(kappas, dtype=float)
    if ks.size == 0:
        raise ValueError("no kappa values given")
    if np.any(~np.isfinite(ks)) or np.any(ks <= 0):
        raise ValueError("kappa values must be positive and finite")
    ks = np.sort(ks)
    if np.any(np.diff(ks) <= 0):
        raise ValueError("kappa values must be distinct")

    jobs = [
        (base.replace(kappa=float(k)), cfg.replace(t_max=sweep_t_max(k, cfg.t_max)),
         threshold, tuple(initial), tuple(cutoffs), early_stop)
        for k in ks
    ]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        rows = [_sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    return SweepResult(rows)


@dataclass(frozen=True)
class FitCoefficients:
    """Coefficients of ``T(kappa) = a/kappa + b/(3 kappa^3) + c/(5 kappa^5)``."""

    a: float
    b: float
    c: float
    stderr_a: float
    stderr_b: float
    stderr_c: float
    rms_residual: float
    n_points: int = 0
    terms: int = 3

    def predict(self, kappa) -> np.ndarray:
        k = np.asarray(kappa, dtype=float)
        return period_law_basis(k, 3) @ np.array([self.a, self.b, self.c])

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in
                ("a", "b", "c", "stderr_a", "stderr_b", "stderr_c", "rms_residual", "n_points", "terms")}


def period_law_basis(kappa, terms: int = 3) -> np.ndarray:
    """Design matrix with columns ``1/kappa, 1/(3 kappa^3), 1/(5 kappa^5)`` (first ``terms``)."""
    if terms not in (1, 2, 3):
        raise ValueError("terms must be 1, 2 or 3")
    k = np.atleast_1d(np.asarray(kappa, dtype=float))
    powers = (1, 3, 5)[:terms]
    return np.column_stack([1.0 / (p * k**p) for p in powers])


def fit_period_law(sweep, *, terms: int = 3, kappa_min: float | None = None, min_points: int = 6) -> FitCoefficients:
    """Unweighted least-squares fit of the odd inverse-power period law.

    ``sweep`` is a :class:`SweepResult` or a ``(kappa, T_ba)`` pair.  The
    normal equations are solved on unit-norm columns; standard errors come
    from the residual variance times the inverse Gram matrix.
    """
    if isinstance(sweep, SweepResult):
        kappa, period = sweep.kappas, sweep.column("T_ba")
    else:
        kappa, period = (np.asarray(x, dtype=float) for x in sweep)
    mask = np.isfinite(period) & np.isfinite(kappa)
    if kappa_min is not None:
        mask &= kappa >= kappa_min
    kappa, period = kappa[mask], period[mask]
    if len(kappa) < max(min_points, terms):
        raise ValueError(f"insufficient data: {len(kappa)} usable rows, need at least {max(min_points, terms)}")

    design = period_law_basis(kappa, terms)
    scale = 1.0 / np.linalg.norm(design, axis=0)
    scaled = design * scale
    gram = scaled.T @ scaled
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("rank-deficient design matrix (kappa values do not separate the basis)")
    factor = scipy.linalg.cho_factor(gram)
    coef = scipy.linalg.cho_solve(factor, scaled.T @ period) * scale

    resid = period - design @ coef
    dof = len(kappa) - terms
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * (scale[:, None] * scipy.linalg.cho_solve(factor, np.eye(terms)) * scale[None, :])
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    full = np.zeros(3)
    full_err = np.zeros(3)
    full[:terms] = coef
    full_err[:terms] = stderr
    return FitCoefficients(
        a=float(full[0]), b=float(full[1]), c=float(full[2]),
        stderr_a=float(full_err[0]), stderr_b=float(full_err[1]), stderr_c=float(full_err[2]),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        n_points=int(len(kappa)), terms=terms,
    )
