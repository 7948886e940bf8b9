"""Heralded single-photon source, loss and detection model.

The heralded state is a weighted difference of two thermal states. Closed
forms for no-click probabilities follow from writing a thermal state as a
Gaussian mixture of coherent states: splitting, loss and displacement act on
each coherent component independently.

Beam-splitter convention: a splitter with transmittivity T leaves the
fraction R = 1 - T in its first mode and sends T to its second mode. For the
bipartite source, mode 0 receives R and mode 1 receives T.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bounds import (
    BoundResult,
    analytic_bound_from_counts,
    margin,
    pc_from_photon_statistics,
)
from .errors import InvalidArgumentError, InvalidParameterError, TruncationError
from .fock import (
    DensityMatrix,
    FockSpace,
    _from_tensor,
    _kron_little_endian,
    _to_tensor,
    beam_splitter,
    dephase_total_number,
    embed,
    partial_trace,
)
from .witness import (
    ClickStats,
    WitnessSpec,
    _sigma_matrix,
    outcome_strings,
    witness_from_counts,
)

__all__ = [
    "SourceParams",
    "Prediction",
    "heralded_weights",
    "heralded_distribution",
    "heralded_state",
    "p00_alpha",
    "arm_no_click",
    "thermal_click_table",
    "thermal_correlator",
    "heralded_click_table",
    "heralded_correlator",
    "model_witness_value",
    "model_click_stats",
    "bipartite_prediction",
    "loss_channel",
    "apply_splitter",
    "apply_dark_counts",
    "click_table_from_state",
    "click_stats_from_state",
    "tripartite_state",
    "tripartite_prediction",
    "DEFAULT_CASCADE",
]

# 50/50 splitter, then a 30/70 splitter on its second output: arms 0.5/0.35/0.15
DEFAULT_CASCADE: tuple[tuple[int, int, float], ...] = ((0, 1, 0.5), (1, 2, 0.3))


@dataclass(frozen=True)
class SourceParams:
    """Heralded source followed by a two-way split.

    ``t_g`` is tanh of the squeezing parameter (T_g² is the pair probability),
    ``eta_h`` the heralding efficiency, ``eta_total`` the source-to-detector
    transmission including detection, ``transmittivity`` the splitter T.
    ``dark_count`` is a per-detector, per-gate accidental click probability.
    """

    t_g: float = float(np.sqrt(1e-3))
    eta_h: float = 0.5
    eta_total: float = 1.0
    transmittivity: float = 0.5
    alpha: float = 0.83
    dark_count: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.t_g < 1.0:
            raise InvalidParameterError(f"t_g must lie in [0, 1), got {self.t_g}")
        if not 0.0 < self.eta_h <= 1.0:
            raise InvalidParameterError(f"eta_h must lie in (0, 1], got {self.eta_h}")
        if not 0.0 <= self.eta_total <= 1.0:
            raise InvalidParameterError(f"eta_total must lie in [0, 1], got {self.eta_total}")
        if not 0.0 <= self.transmittivity <= 1.0:
            raise InvalidParameterError(f"transmittivity must lie in [0, 1], got {self.transmittivity}")
        if self.alpha < 0:
            raise InvalidParameterError("alpha must be non-negative")
        if not 0.0 <= self.dark_count < 1.0:
            raise InvalidParameterError(f"dark_count must lie in [0, 1), got {self.dark_count}")

    @property
    def r_h(self) -> float:
        return float(np.sqrt(1.0 - self.eta_h))

    @property
    def reflectivity(self) -> float:
        return 1.0 - self.transmittivity


# ---------------------------------------------------------------------------
# heralded state


def heralded_weights(params: SourceParams) -> tuple[float, float, float, float]:
    """(n1, n2, w, c) with ρ_h = w [ρ_th(n1) − c ρ_th(n2)]; w (1 − c) = 1."""
    tg2 = params.t_g**2
    rh2 = params.r_h**2
    if tg2 == 0.0:
        # single-photon limit of the same expression
        return 0.0, 0.0, float("inf"), 1.0
    n1 = tg2 / (1.0 - tg2)
    n2 = rh2 * tg2 / (1.0 - rh2 * tg2)
    w = (1.0 - rh2 * tg2) / (tg2 * (1.0 - rh2))
    c = (1.0 - tg2) / (1.0 - rh2 * tg2)
    return n1, n2, w, c


def _geometric(nbar: float, dim: int) -> np.ndarray:
    n = np.arange(dim)
    if nbar == 0.0:
        return (n == 0).astype(float)
    return (nbar / (1.0 + nbar)) ** n / (1.0 + nbar)


def heralded_distribution(params: SourceParams, dim: int, transmission: float = 1.0) -> np.ndarray:
    """Photon-number distribution of the heralded state after loss ``transmission``.

    Loss maps a thermal state of mean n̄ to one of mean ηn̄, so the lossy state is
    still a thermal difference. Raises :class:`TruncationError` when more than
    1e-10 of the probability lies at or above ``dim`` photons.
    """
    n1, n2, w, c = heralded_weights(params)
    if not np.isfinite(w):
        p = np.zeros(dim)
        p[0], p[min(1, dim - 1)] = 1.0 - transmission, transmission
        if dim < 2:
            raise TruncationError("a single photon needs at least two levels")
        return p
    m1, m2 = n1 * transmission, n2 * transmission
    tail = w * ((m1 / (1 + m1)) ** dim - c * (m2 / (1 + m2)) ** dim)
    if tail > 1e-10:
        raise TruncationError(f"heralded-state tail {tail:.3g} above {dim} photons exceeds 1e-10")
    p = w * (_geometric(m1, dim) - c * _geometric(m2, dim))
    return np.clip(p, 0.0, None)


def heralded_state(params: SourceParams, dim: int = 20) -> DensityMatrix:
    """Single-mode heralded state (before any loss); diagonal in the Fock basis."""
    p = heralded_distribution(params, dim)
    return DensityMatrix(FockSpace((dim,)), np.diag(p / p.sum()).astype(complex))


# ---------------------------------------------------------------------------
# closed-form probabilities for a split thermal state


def p00_alpha(params: SourceParams, nbar: float) -> float:
    """No click on both arms for ρ_th(n̄) after loss, splitting and displacement α on each arm."""
    m = nbar * params.eta_total
    x = params.alpha**2
    s = (np.sqrt(params.reflectivity) + np.sqrt(params.transmittivity)) ** 2
    return float(np.exp(-2 * x + m / (1 + m) * s * x) / (1 + m))


def arm_no_click(params: SourceParams, nbar: float, fraction: float, alpha: float | None = None) -> float:
    """No click on one arm carrying ``fraction`` of the split thermal light."""
    a = params.alpha if alpha is None else alpha
    k = 1.0 + params.eta_total * nbar * fraction
    return float(np.exp(-(a**2) / k) / k)


def thermal_click_table(params: SourceParams, nbar: float) -> dict[str, float]:
    """Joint outcome table for a split thermal input (character i is mode i)."""
    p00 = p00_alpha(params, nbar)
    p0_first = arm_no_click(params, nbar, params.reflectivity)
    p0_second = arm_no_click(params, nbar, params.transmittivity)
    return {"00": p00, "0c": p0_first - p00, "c0": p0_second - p00,
            "cc": 1.0 - p0_first - p0_second + p00}


def thermal_correlator(params: SourceParams, nbar: float) -> float:
    """⟨Sα ⊗ Sα⟩ = P00 + Pcc − P0c − Pc0 for a split thermal input."""
    return float(1.0 + 4.0 * p00_alpha(params, nbar)
                 - 2.0 * arm_no_click(params, nbar, params.reflectivity)
                 - 2.0 * arm_no_click(params, nbar, params.transmittivity))


def _single_photon_table(params: SourceParams) -> dict[str, float]:
    # limit t_g -> 0: one photon with transmission eta_total
    x = params.alpha**2
    eta = params.eta_total
    vac = np.exp(-2 * x)
    r, t = params.reflectivity, params.transmittivity
    # no-click probability on both arms given the photon is in the arm fractions
    p00 = (1 - eta) * vac + eta * vac * x * (np.sqrt(r) + np.sqrt(t)) ** 2
    p0_first = (1 - eta * r) * np.exp(-x) + eta * r * x * np.exp(-x)
    p0_second = (1 - eta * t) * np.exp(-x) + eta * t * x * np.exp(-x)
    return {"00": p00, "0c": p0_first - p00, "c0": p0_second - p00,
            "cc": 1.0 - p0_first - p0_second + p00}


def heralded_click_table(params: SourceParams, displaced: bool = True) -> dict[str, float]:
    """Outcome table of the heralded source, with or without the displacement (no dark counts)."""
    p = params if displaced else _with_alpha(params, 0.0)
    n1, n2, w, c = heralded_weights(p)
    if not np.isfinite(w):
        return _single_photon_table(p)
    t1, t2 = thermal_click_table(p, n1), thermal_click_table(p, n2)
    return {k: float(w * (t1[k] - c * t2[k])) for k in t1}


def heralded_correlator(params: SourceParams, displaced: bool = True) -> float:
    """⟨Sα ⊗ Sα⟩ (or ⟨S0 ⊗ S0⟩ when ``displaced`` is False) on the heralded state."""
    p = params if displaced else _with_alpha(params, 0.0)
    n1, n2, w, c = heralded_weights(p)
    if not np.isfinite(w):
        t = _single_photon_table(p)
        return float(t["00"] + t["cc"] - t["0c"] - t["c0"])
    return float(w * (thermal_correlator(p, n1) - c * thermal_correlator(p, n2)))


def _with_alpha(params: SourceParams, alpha: float) -> SourceParams:
    return SourceParams(params.t_g, params.eta_h, params.eta_total, params.transmittivity,
                        alpha, params.dark_count)


# ---------------------------------------------------------------------------
# detector noise


def apply_dark_counts(table: Mapping[str, float], dark_count: float | Sequence[float]) -> dict[str, float]:
    """Add independent accidental clicks with probability ``dark_count`` per detector.

    The no-click probability of any set of detectors S is multiplied by
    Π_{i∈S}(1 − d_i); the joint table is rebuilt by inclusion-exclusion.
    """
    keys = list(table)
    n = len(keys[0])
    d = np.broadcast_to(np.asarray(dark_count, dtype=float), (n,))
    if np.any(d < 0) or np.any(d >= 1):
        raise InvalidParameterError("dark-count probabilities must lie in [0, 1)")
    if not np.any(d):
        return {k: float(v) for k, v in table.items()}
    subsets = list(itertools.product((0, 1), repeat=n))

    def no_click(mask):
        return sum(v for k, v in table.items() if all(k[i] == "0" for i in range(n) if mask[i]))

    q = {mask: no_click(mask) * float(np.prod([1 - d[i] for i in range(n) if mask[i]])) for mask in subsets}
    out = {}
    for k in outcome_strings(n):
        zeros = tuple(1 if ch == "0" else 0 for ch in k)
        total = 0.0
        for mask in subsets:
            if all(mask[i] >= zeros[i] for i in range(n)):
                extra = sum(mask) - sum(zeros)
                total += (-1) ** extra * q[mask]
        out[k] = float(total)
    return out


# ---------------------------------------------------------------------------
# bipartite predictions


def _arm_pc(params: SourceParams, fraction: float, dim: int = 40) -> float:
    p = heralded_distribution(params, dim, params.eta_total * fraction)
    return pc_from_photon_statistics(p).pc


def model_click_stats(params: SourceParams, pc: Sequence[float] | float | None = None) -> ClickStats:
    """Predicted bipartite statistics.

    ``pc`` overrides the coincidence bounds; by default they are computed
    from the photon-number distribution reaching each arm.
    """
    undisplaced = apply_dark_counts(heralded_click_table(params, displaced=False), params.dark_count)
    displaced = apply_dark_counts(heralded_click_table(params, displaced=True), params.dark_count)
    if pc is None:
        pcs = (_arm_pc(params, params.reflectivity), _arm_pc(params, params.transmittivity))
    else:
        pcs = tuple(np.broadcast_to(np.asarray(pc, dtype=float), (2,)))
    return ClickStats(2, undisplaced, {(0, 1): displaced}, pcs, params.alpha)


def model_witness_value(params: SourceParams) -> float:
    """Predicted 2⟨Sα⊗Sα⟩ − ⟨S0⊗S0⟩ (bipartite normalization), dark counts included."""
    if params.dark_count == 0.0:
        return 2.0 * heralded_correlator(params) - heralded_correlator(params, displaced=False)
    return witness_from_counts(model_click_stats(params, 0.0), WitnessSpec(2, params.alpha, "bipartite"))


@dataclass(frozen=True)
class Prediction:
    witness_value: float
    bound: BoundResult
    margin: float
    stats: ClickStats = field(repr=False)


def _predict(stats: ClickStats, spec: WitnessSpec) -> Prediction:
    z = witness_from_counts(stats, spec)
    bound = analytic_bound_from_counts(stats, spec.alpha)
    return Prediction(z, bound, margin(z, spec, bound), stats)


def bipartite_prediction(params: SourceParams, pc: Sequence[float] | float | None = None) -> Prediction:
    """Witness value, closed-form PPT bound and margin for the bipartite source model."""
    stats = model_click_stats(params, pc)
    return _predict(stats, WitnessSpec(2, params.alpha, "bipartite"))


# ---------------------------------------------------------------------------
# Fock-space channels


def loss_channel(rho: DensityMatrix, eta: float, mode: int = 0) -> DensityMatrix:
    """Attenuate ``mode`` by mixing it with vacuum on a splitter of transmittivity ``eta``.

    The mode is fed into the first port, the vacuum ancilla into the second;
    the second output port is kept. Each Kraus operator is one row block of
    the splitter unitary with the first output in a fixed Fock state.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"loss transmission must lie in [0, 1], got {eta}")
    n_modes = rho.space.n_modes
    if not 0 <= mode < n_modes:
        raise InvalidArgumentError(f"mode {mode} out of range")
    d = rho.space.dims[mode]
    u = beam_splitter(eta, d, d).matrix
    # little-endian pair index: (first, second) -> first + d * second
    kraus = u.reshape(d, d, d, d)[:, :, 0, :].transpose(1, 0, 2)  # [k, m, n]
    dims = list(rho.dims)
    t = _to_tensor(rho.matrix, dims)
    row, col = mode, mode + n_modes
    t = np.tensordot(kraus, t, axes=([2], [row]))  # [k, m, ...]
    t = np.moveaxis(t, 1, row + 1)
    t = np.tensordot(t, kraus.conj(), axes=([0, col + 1], [0, 2]))
    t = np.moveaxis(t, -1, col)
    m = _from_tensor(t, dims)
    return DensityMatrix(rho.space, 0.5 * (m + m.conj().T))


def apply_splitter(rho: DensityMatrix, mode_a: int, mode_b: int, transmittivity: float) -> DensityMatrix:
    """Mix two modes of ``rho``: ``mode_a`` keeps R, ``mode_b`` receives T."""
    da, db = rho.space.dims[mode_a], rho.space.dims[mode_b]
    u = embed(beam_splitter(transmittivity, da, db), [mode_a, mode_b], rho.space).matrix
    m = u @ rho.matrix @ u.conj().T
    return DensityMatrix(rho.space, 0.5 * (m + m.conj().T))


def click_table_from_state(rho: DensityMatrix, displaced_modes: Sequence[int] = (),
                           alpha: float = 0.0, dark_count: float = 0.0) -> dict[str, float]:
    """Joint click table for unit-efficiency detectors, displacing ``displaced_modes`` by α.

    The state is phase averaged first, matching the witness convention.
    """
    rho = dephase_total_number(rho)
    dims = rho.space.dims
    n = len(dims)
    no_click = []
    for i, d in enumerate(dims):
        s = _sigma_matrix(complex(alpha if i in displaced_modes else 0.0), 1.0, d)
        no_click.append(0.5 * (np.eye(d) + s))
    table = {}
    for outcome in outcome_strings(n):
        factors = [p if ch == "0" else np.eye(len(p)) - p for p, ch in zip(no_click, outcome)]
        proj = _kron_little_endian(factors)
        table[outcome] = float(np.real(np.einsum("ij,ji->", proj, rho.matrix)))
    total = sum(table.values())
    table = {k: v / total for k, v in table.items()}
    return apply_dark_counts(table, dark_count)


def click_stats_from_state(rho: DensityMatrix, alpha: float, dark_count: float = 0.0,
                           pc: Sequence[float] | float | None = None) -> ClickStats:
    """Statistics for every setting the witness needs: no displacement and each displaced pair.

    By default ``pc[i]`` is computed from the photon-number distribution of mode i.
    """
    n = rho.space.n_modes
    undisplaced = click_table_from_state(rho, (), alpha, dark_count)
    displaced = {pair: click_table_from_state(rho, pair, alpha, dark_count)
                 for pair in itertools.combinations(range(n), 2)}
    if pc is None:
        pcs = tuple(pc_from_photon_statistics(np.real(np.diag(partial_trace(rho, [i]).matrix))).pc
                    for i in range(n))
    else:
        pcs = tuple(np.broadcast_to(np.asarray(pc, dtype=float), (n,)))
    return ClickStats(n, undisplaced, displaced, pcs, alpha)


# ---------------------------------------------------------------------------
# tripartite source


def tripartite_state(params: SourceParams, arm_transmission: float | Sequence[float] = 0.19,
                     cascade: Sequence[tuple[int, int, float]] = DEFAULT_CASCADE,
                     dim: int = 5) -> DensityMatrix:
    """Heralded photon in mode 0 → splitter cascade → loss on every arm.

    ``params.eta_total`` and ``params.transmittivity`` are not used; the
    splitting is set by ``cascade`` as (first mode, second mode, T) triples.
    """
    p = heralded_distribution(params, dim)
    space = FockSpace((dim,) * 3)
    vacuum = np.zeros(dim)
    vacuum[0] = 1.0
    diag = np.kron(np.kron(vacuum, vacuum), p / p.sum())
    rho = DensityMatrix(space, np.diag(diag).astype(complex))
    for a, b, t in cascade:
        rho = apply_splitter(rho, a, b, t)
    etas = np.broadcast_to(np.asarray(arm_transmission, dtype=float), (3,))
    for mode, eta in enumerate(etas):
        rho = loss_channel(rho, float(eta), mode)
    return rho


def tripartite_prediction(params: SourceParams, arm_transmission: float | Sequence[float] = 0.19,
                          cascade: Sequence[tuple[int, int, float]] = DEFAULT_CASCADE,
                          pc: Sequence[float] | float | None = None, dim: int = 5) -> Prediction:
    """Witness value, closed-form genuine bound and margin for the three-arm source."""
    rho = tripartite_state(params, arm_transmission, cascade, dim)
    stats = click_stats_from_state(rho, params.alpha, params.dark_count, pc)
    return _predict(stats, WitnessSpec(3, params.alpha, "tripartite"))
