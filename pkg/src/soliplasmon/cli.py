"""Command-line entry point: ``simulate``, ``sweep`` and ``fit``.

Exit status: 0 success, 2 usage error, 3 configuration or input-data error,
4 numerical failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import FitCoefficients, SweepResult, SweepRow, detect_periods, fit_period_law, sweep_kappa
from .config import ConfigError, RunConfig, load_config
from .dynamics import DynamicsError
from .fock import MatrixExponentialError
from .model import build_hamiltonian
from .witnesses import witness_trace

__all__ = [
    "EXIT_CONFIG", "EXIT_IO", "EXIT_NUMERIC", "EXIT_OK", "EXIT_USAGE",
    "SWEEP_HEADER", "WITNESS_HEADER", "main", "read_sweep_csv",
]

log = logging.getLogger("soliplasmon")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4
EXIT_IO = 5

WITNESS_HEADER = ["t", "zeta_ab", "zeta_ba", "n_a", "n_b", "raw_trace"]
SWEEP_HEADER = ["kappa", "T_ba", "T_ab"]
PREDICT_HEADER = ["kappa", "T_ba_pred"]


class NumericError(RuntimeError):
    pass


def fmt(x) -> str:
    """Shortest round-trip decimal text; empty for absent values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def summary_path(out) -> Path:
    return Path(out).with_suffix(".summary.json")


def cmd_simulate(config_path, out=None) -> dict:
    """Run one trajectory; write the witness CSV and a JSON summary next to it."""
    config = load_config(config_path)
    out = Path(out or config.output_path)
    start = time.perf_counter()
    space = config.space
    h = build_hamiltonian(config.model, space)
    psi0 = config.initial_state.build(space)
    trace = witness_trace(psi0, h, config.evolution)

    rows = zip(trace.t, trace.zeta_ab, trace.zeta_ba, trace.n_a, trace.n_b, trace.raw_trace)
    atomic_write(out, _csv_text(WITNESS_HEADER, rows))

    periods = {wid: [p.to_dict() for p in detect_periods(trace, wid, config.threshold)] for wid in ("ab", "ba")}
    summary = {
        "software_version": __version__,
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "initial_state": psi0.label,
        "csv_path": str(out),
        "samples": len(trace),
        "periods": periods,
        "peak_witness": {"ab": float(np.max(trace.zeta_ab)), "ba": float(np.max(trace.zeta_ba))},
        "wall_clock_seconds": time.perf_counter() - start,
    }
    atomic_write(summary_path(out), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def kappa_grid(kappa_min: float, kappa_max: float, points: int, linear: bool = False) -> np.ndarray:
    if not (0 < kappa_min < kappa_max) or points < 2:
        raise ValueError("need 0 < kappa_min < kappa_max and points >= 2")
    if linear:
        return np.linspace(kappa_min, kappa_max, points)
    return np.geomspace(kappa_min, kappa_max, points)


def cmd_sweep(config_path, kappa_min, kappa_max, points, linear=False, out=None) -> SweepResult:
    """Sweep kappa from the configured Fock state; write ``kappa,T_ba,T_ab`` CSV."""
    config = load_config(config_path)
    if config.initial_state.kind != "fock":
        raise ConfigError("sweep requires a Fock initial state")
    out = Path(out or config.output_path)
    kappas = kappa_grid(kappa_min, kappa_max, points, linear)
    start = time.perf_counter()
    result = sweep_kappa(
        config.model, kappas, config.evolution,
        threshold=config.threshold,
        initial=(config.initial_state.n_a, config.initial_state.n_b),
        cutoffs=config.cutoffs,
    )
    atomic_write(out, _csv_text(SWEEP_HEADER, ((r.kappa, r.T_ba, r.T_ab) for r in result.rows)))
    summary = {
        "software_version": __version__,
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "csv_path": str(out),
        "grid": {"kappa_min": kappa_min, "kappa_max": kappa_max, "points": points,
                 "spacing": "linear" if linear else "geometric"},
        "rows": [{"kappa": r.kappa, "T_ba": r.T_ba, "T_ab": r.T_ab, "diagnostics": r.diagnostics}
                 for r in result.rows],
        "wall_clock_seconds": time.perf_counter() - start,
    }
    atomic_write(summary_path(out), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


def read_sweep_csv(path) -> SweepResult:
    """Parse a ``kappa,T_ba,T_ab`` file; empty fields become absent periods."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(SWEEP_HEADER)}, got {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            try:
                kappa = float(rec[0])
                t_ba = float(rec[1]) if rec[1] else None
                t_ab = float(rec[2]) if rec[2] else None
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: malformed number") from None
            rows.append(SweepRow(kappa, t_ba, t_ab))
    try:
        return SweepResult(rows)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_fit(in_path, predict=None, report=None) -> FitCoefficients:
    """Fit the period law to a sweep CSV; write a JSON report and optional predicted curve."""
    sweep = read_sweep_csv(in_path)
    usable = int(np.sum(np.isfinite(sweep.column("T_ba"))))
    if usable < 6:
        raise ConfigError(f"insufficient data: {usable} usable rows in {in_path}, need at least 6")
    try:
        fit = fit_period_law(sweep)
    except ValueError as exc:
        raise NumericError(str(exc)) from None

    report = Path(report) if report else Path(in_path).with_suffix(".fit.json")
    doc = {"software_version": __version__, "input": str(in_path), "fit": fit.to_dict()}
    atomic_write(report, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if predict:
        ks = sweep.kappas[np.isfinite(sweep.column("T_ba"))]
        grid = np.geomspace(ks.min(), ks.max(), 200)
        atomic_write(predict, _csv_text(PREDICT_HEADER, zip(grid, fit.predict(grid))))
    return fit


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soliplasmon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve one initial state and record the witnesses")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="witness CSV path (default: config output_path)")

    p = sub.add_parser("sweep", help="witnessing periods across a kappa grid")
    p.add_argument("--config", required=True)
    p.add_argument("--kappa-min", type=float, required=True)
    p.add_argument("--kappa-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--linear", action="store_true", help="linear instead of geometric spacing")
    p.add_argument("--out", help="sweep CSV path (default: config output_path)")

    p = sub.add_parser("fit", help="fit T_ba(kappa) = a/k + b/(3k^3) + c/(5k^5)")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--predict", help="write kappa,T_ba_pred for plotting")
    p.add_argument("--report", help="JSON report path (default: <in>.fit.json)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            summary = cmd_simulate(args.config, args.out)
            for wid in ("ab", "ba"):
                durations = [round(p["duration"], 6) for p in summary["periods"][wid]]
                print(f"T_{wid}: {durations}")
        elif args.command == "sweep":
            try:
                kappa_grid(args.kappa_min, args.kappa_max, args.points, args.linear)
            except ValueError as exc:
                parser.error(str(exc))
            result = cmd_sweep(args.config, args.kappa_min, args.kappa_max, args.points, args.linear, args.out)
            print(f"{len(result)} kappa points, {int(np.sum(np.isfinite(result.column('T_ba'))))} with T_ba")
        else:
            fit = cmd_fit(args.in_path, args.predict, args.report)
            print(f"a = {fit.a:.6g} +/- {fit.stderr_a:.3g}")
            print(f"b = {fit.b:.6g} +/- {fit.stderr_b:.3g}")
            print(f"c = {fit.c:.6g} +/- {fit.stderr_c:.3g}")
            print(f"rms residual = {fit.rms_residual:.3g}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DynamicsError, MatrixExponentialError, NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # Remaining ValueErrors come from validating user-supplied physics.
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
