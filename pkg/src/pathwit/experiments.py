"""Parameter sweeps and verdicts built on the source model and the bounds."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import (
    analytic_bound_from_counts,
    margin,
    margin_w_analytic,
    qubit_ppt_bound_sdp,
    w_statistics_diagonal,
)
from .config import ExperimentConfig, Grid
from .errors import ConfigError
from .source import SourceParams, bipartite_prediction, click_stats_from_state, tripartite_prediction
from .witness import ClickStats, WitnessSpec, w_state, witness_from_counts, z_w_analytic

__all__ = [
    "Table",
    "thread_count",
    "source_params",
    "run_bs_sweep",
    "run_loss_sweep",
    "run_n_scaling",
    "run_tripartite",
    "run_verdict",
    "Verdict",
    "zero_crossing",
]


@dataclass
class Table:
    columns: list[str]
    rows: list[list[float]]
    notes: list[str]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def thread_count() -> int:
    raw = os.environ.get("PATHWIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"PATHWIT_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"PATHWIT_THREADS must be a positive integer, got {raw!r}")
    return n


def _map(fn: Callable, items: Iterable) -> list:
    items = list(items)
    n = min(thread_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        # map keeps the grid order, so output does not depend on scheduling
        return list(pool.map(fn, items))


def source_params(cfg: ExperimentConfig) -> SourceParams:
    return SourceParams(cfg.t_g, cfg.eta_h, cfg.eta_total, cfg.transmittivity, cfg.alpha, cfg.dark_count_value())


def _bipartite_row(params: SourceParams, pc, alpha_err: float, eta_err: float) -> list[float]:
    pred = bipartite_prediction(params, pc)
    corners = []
    for da in (-alpha_err, alpha_err):
        for de in (-eta_err, eta_err):
            eta = float(np.clip(params.eta_total + de, 0.0, 1.0))
            p = replace(params, alpha=max(params.alpha + da, 0.0), eta_total=eta)
            corners.append(bipartite_prediction(p, pc).margin)
    corners.append(pred.margin)
    return [pred.witness_value, pred.bound.value, pred.margin, min(corners), max(corners)]


def run_bs_sweep(cfg: ExperimentConfig) -> Table:
    """Witness, bound and margin against the splitter transmittivity T (T = 0.5 is 50/50)."""
    grid = cfg.grid or Grid(0.0, 0.5, 0.05)
    base = source_params(cfg)
    pc = cfg.pc_value()

    def row(t):
        return [float(t)] + _bipartite_row(replace(base, transmittivity=float(t)), pc, cfg.alpha_err, cfg.eta_err)

    rows = _map(row, grid.points())
    table = Table(["transmittivity", "witness_value", "ppt_bound", "margin", "envelope_lo", "envelope_hi"],
                  rows, [])
    best = rows[int(np.argmax([r[3] for r in rows]))]
    table.notes.append(f"largest margin {best[3]:.6g} at transmittivity {best[0]:.6g}")
    return table


def zero_crossing(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Smallest x where y changes sign from non-positive to positive, by linear interpolation."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    for i in range(len(x) - 1):
        if y[i] <= 0.0 < y[i + 1]:
            return float(x[i] + (x[i + 1] - x[i]) * (-y[i]) / (y[i + 1] - y[i]))
    return None


def run_loss_sweep(cfg: ExperimentConfig) -> Table:
    """Witness, bound and margin against the overall transmission."""
    grid = cfg.grid or Grid(0.02, 1.0, 0.02)
    base = source_params(cfg)
    pc = cfg.pc_value()

    def row(eta):
        return [float(eta)] + _bipartite_row(replace(base, eta_total=float(eta)), pc, cfg.alpha_err, cfg.eta_err)

    rows = _map(row, grid.points())
    table = Table(["eta_total", "witness_value", "ppt_bound", "margin", "envelope_lo", "envelope_hi"], rows, [])
    crossing = zero_crossing(table.column("eta_total"), table.column("margin"))
    if crossing is None:
        table.notes.append("margin does not cross zero on this grid")
    else:
        table.notes.append(f"margin crosses zero at eta_total ~ {crossing:.6g}")
    return table


def _optimal_alpha(n: int) -> float:
    res = minimize_scalar(lambda a: -margin_w_analytic(n, 1, a), bounds=(0.05, 2.0), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def run_n_scaling(cfg: ExperimentConfig) -> Table:
    """Genuine-entanglement margin of W_N at its optimal displacement, N = n_min..n_max."""

    def row(n):
        a = _optimal_alpha(n)
        zw = z_w_analytic(n, a)
        m = margin_w_analytic(n, 1, a)
        sdp = float("nan")
        if n <= cfg.sdp_max_modes:
            bound = qubit_ppt_bound_sdp(n, a, "genuine", diagonal=w_statistics_diagonal(n))
            sdp = zw - bound.value
        return [n, a, zw, zw - m, m, sdp]

    rows = _map(row, range(cfg.n_min, cfg.n_max + 1))
    return Table(["n_modes", "alpha_opt", "z_w", "z_ppt_max", "margin", "sdp_margin"], rows, [])


def _ideal_w3_stats(alpha: float) -> ClickStats:
    return click_stats_from_state(w_state(3), alpha, pc=0.0)


def run_tripartite(cfg: ExperimentConfig) -> Table:
    """Ideal W_3 margin swept over α, plus the lossy three-arm source prediction."""
    grid = cfg.grid or Grid(0.70, 0.90, 0.005)
    spec_of = lambda a: WitnessSpec(3, a, "tripartite")  # noqa: E731

    def ideal(a):
        stats = _ideal_w3_stats(float(a))
        z = witness_from_counts(stats, spec_of(float(a)))
        bound = analytic_bound_from_counts(stats, float(a))
        return ["ideal", float(a), z, bound.value, margin(z, spec_of(float(a)), bound)]

    rows = _map(ideal, grid.points())
    best = max(rows, key=lambda r: r[4])
    params = SourceParams(cfg.t_g, cfg.eta_h, 1.0, 0.5, cfg.alpha, cfg.dark_count_value())
    lossy = tripartite_prediction(params, cfg.arm_transmission, cfg.cascade_steps(), cfg.pc_value())
    rows.append(["lossy", cfg.alpha, lossy.witness_value, lossy.bound.value, lossy.margin])
    zero = tripartite_prediction(params, 0.0, cfg.cascade_steps(), cfg.pc_value())
    rows.append(["no-transmission", cfg.alpha, zero.witness_value, zero.bound.value, zero.margin])
    notes = [f"ideal maximum margin {best[4]:.6g} at alpha {best[1]:.6g}",
             f"lossy margin {lossy.margin:.6g} (arm transmission {cfg.arm_transmission:g}, alpha {cfg.alpha:g})"]
    return Table(["case", "alpha", "z_value", "bound", "margin"], rows, notes)


@dataclass(frozen=True)
class Verdict:
    verdict: str
    witness_value: float
    bound: float
    margin: float
    alpha: float
    bound_valid: bool

    def report(self) -> str:
        lines = [f"verdict: {self.verdict}",
                 f"witness_value: {self.witness_value:.12g}",
                 f"ppt_bound: {self.bound:.12g}",
                 f"margin: {self.margin:.12g}",
                 f"alpha: {self.alpha:.12g}"]
        if not self.bound_valid:
            lines.append("note: alpha is outside the validity range of the closed-form bound")
        return "\n".join(lines) + "\n"


def run_verdict(stats: ClickStats, alpha: float | None = None) -> Verdict:
    """Compare the measured witness with the closed-form bound. Never claims separability."""
    a = alpha if alpha is not None else stats.alpha
    if a is None:
        raise ConfigError("alpha is missing from both the counts file and the command line")
    spec = WitnessSpec(stats.n_modes, float(a), "bipartite" if stats.n_modes == 2 else "tripartite")
    z = witness_from_counts(stats, spec)
    bound = analytic_bound_from_counts(stats, float(a))
    m = margin(z, spec, bound)
    if m > 0.0 and bound.valid:
        verdict = "entangled-in-qubit-subspace" if stats.n_modes == 2 else "genuinely-entangled"
    else:
        verdict = "inconclusive"
    return Verdict(verdict, z, bound.value, m, float(a), bound.valid)
