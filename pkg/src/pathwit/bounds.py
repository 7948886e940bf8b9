"""Separability thresholds for the path-entanglement witness.

Every bound is tagged with the witness normalization it refers to
(``general`` or ``bipartite``); comparing a witness value with a bound of a
different normalization raises :class:`NormalizationMismatchError`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidDataError,
    NonConvergenceError,
    NormalizationMismatchError,
)
from .fock import FockSpace, _partial_transpose_matrix
from .sdp import (
    ElementBound,
    LinearConstraint,
    PsdConstraint,
    SdpProblem,
    SdpSolution,
    solve,
)
from .witness import ClickStats, WitnessSpec, build_witness, w_state, witness_terms, z_w_analytic

__all__ = [
    "BoundResult",
    "PcEstimate",
    "margin_w_analytic",
    "w_bound_analytic",
    "bipartite_bound_from_counts",
    "tripartite_bound_from_counts",
    "analytic_bound_from_counts",
    "qubit_ppt_bound_sdp",
    "qudit_ppt_bound_sdp",
    "pc_from_photon_statistics",
    "z_alg",
    "z_alg_spectral",
    "w_statistics_diagonal",
    "margin",
    "BIPARTITE_MIN_ALPHA",
    "TRIPARTITE_MIN_ALPHA",
]

BIPARTITE_MIN_ALPHA = 0.45
TRIPARTITE_MIN_ALPHA = 0.67

_SOLVER_DEFAULTS = {"tolerance": 1e-7, "max_iterations": 200_000}


@dataclass(frozen=True)
class BoundResult:
    """Upper bound on the witness value of states without the tested entanglement.

    ``bipartition`` is the transposed mode subset, or ``"genuine"`` for the
    maximum over all bipartitions. ``valid`` is False when the closed form is
    used outside its α regime.
    """

    value: float
    bipartition: tuple[int, ...] | str
    method: str
    alpha: float
    valid: bool = True
    normalization: str = "general"
    solution: SdpSolution | None = None


def margin(witness_value: float, spec: WitnessSpec, bound: BoundResult) -> float:
    """witness − bound, refusing to mix normalizations."""
    if spec.normalization != bound.normalization:
        raise NormalizationMismatchError(
            f"witness normalization {spec.normalization!r} vs bound {bound.normalization!r}")
    return float(witness_value - bound.value)


# ---------------------------------------------------------------------------
# closed forms for W states


def margin_w_analytic(n_modes: int, m: int, alpha: float) -> float:
    """z_W − z_ppt,m = 2^{N+3} m (N−m)/N |α|² e^{−2|α|²} (general normalization).

    The genuine-entanglement margin is the ``m = 1`` value.
    """
    if not 1 <= m <= n_modes - 1:
        raise InvalidArgumentError(f"bipartition size must lie in 1..{n_modes - 1}, got {m}")
    x = abs(alpha) ** 2
    return float(2 ** (n_modes + 3) * m * (n_modes - m) / n_modes * x * np.exp(-2 * x))


def w_bound_analytic(n_modes: int, alpha: float, m: int | None = None) -> BoundResult:
    """PPT bound for W-state statistics; ``m=None`` gives the genuine bound."""
    size = 1 if m is None else m
    value = z_w_analytic(n_modes, alpha) - margin_w_analytic(n_modes, size, alpha)
    part = "genuine" if m is None else tuple(range(m))
    return BoundResult(value, part, "analytic-W", float(alpha))


# ---------------------------------------------------------------------------
# closed forms from measured statistics


def _check_stats(stats: ClickStats, n_modes: int):
    if not isinstance(stats, ClickStats):
        raise InvalidDataError("expected ClickStats")
    if stats.n_modes != n_modes:
        raise InvalidDataError(f"expected {n_modes}-mode statistics, got {stats.n_modes}")


def bipartite_bound_from_counts(stats: ClickStats, alpha: float) -> BoundResult:
    """Closed-form bipartite PPT bound (factor-2-removed normalization).

    Uses the undisplaced table and the coincidence bounds only. The closed form
    holds for α ≥ 0.45; below that the result is flagged invalid.
    """
    _check_stats(stats, 2)
    P = stats.undisplaced
    pc1, pc2 = stats.pc
    x = abs(alpha) ** 2
    e = np.exp(-x)
    s = np.sqrt
    value = (2 * (-1 + 2 * e) ** 2 - 1) * P["00"]
    value += (2 * (-1 + 2 * e) * (-1 + 2 * e * x) + 1) * (P["0c"] + P["c0"])
    value += 2 * (2 * (-1 + e * x**2) ** 2 - 1) * pc1
    value += 2 * (2 * (-1 + 2 * e) * (-1 + e * x**2) + 4) * (pc1 + pc2)
    value += 16 * x * np.exp(-2 * x) * (
        s(pc1 * pc2) * x**2
        + s(P["00"] * P["cc"])
        + (s(pc2 * P["cc"]) + s(pc1 * P["cc"]) + s(pc1 * pc2)) * x
    )
    return BoundResult(float(value), (0,), "analytic-counts", float(alpha),
                       valid=abs(alpha) >= BIPARTITE_MIN_ALPHA, normalization="bipartite")


def tripartite_bound_from_counts(stats: ClickStats, alpha: float) -> BoundResult:
    """Closed-form bound for genuine tripartite entanglement (general normalization).

    Valid for α ≥ 0.67; below that the result is flagged invalid.
    """
    _check_stats(stats, 3)
    P = stats.undisplaced
    p1, p2, p3 = stats.pc
    x = abs(alpha) ** 2
    e = np.exp(-x)
    s = np.sqrt
    value = (-3 + 24 * (-1 + 2 * e) ** 2) * P["000"]
    value += (5 + 16 * (-1 + 2 * e) * (-1 + 2 * e * x)) * (P["00c"] + P["0c0"] + P["c00"])
    value += 4 * (1 + 4 * (-1 + e * x**2) * (-3 + 4 * e + e * x**2)) * (p1 + p2 + p3)
    coherent = x * (s(p3 * P["0cc"]) + s(p3 * P["c0c"]) + s(p2 * P["0cc"])
                    + s(p2 * P["cc0"]) + s(p1 * P["c0c"]) + s(p1 * P["cc0"]))
    coherent += x * (1 + x) * (s(p3 * p2) + s(p3 * p1) + s(p2 * p1))
    coherent += max(
        s(P["0c0"] * P["00c"]) + s(P["000"] * P["c0c"]) + s(P["000"] * P["cc0"]),
        s(P["c00"] * P["00c"]) + s(P["000"] * P["0cc"]) + s(P["000"] * P["cc0"]),
        s(P["0c0"] * P["c00"]) + s(P["000"] * P["c0c"]) + s(P["000"] * P["0cc"]),
    )
    value += 64 * x * np.exp(-2 * x) * coherent
    value += 33 * (2 * (p1 + p2 + p3)
                   - max(0.0, 2 * (p1 + p2) - 1, 2 * (p1 + p3) - 1, 2 * (p2 + p3) - 1))
    return BoundResult(float(value), "genuine", "analytic-counts", float(alpha),
                       valid=abs(alpha) >= TRIPARTITE_MIN_ALPHA, normalization="general")


def analytic_bound_from_counts(stats: ClickStats, alpha: float) -> BoundResult:
    if stats.n_modes == 2:
        return bipartite_bound_from_counts(stats, alpha)
    if stats.n_modes == 3:
        return tripartite_bound_from_counts(stats, alpha)
    raise InvalidArgumentError("closed-form bounds exist for two and three modes only")


# ---------------------------------------------------------------------------
# coincidence statistics


class PcEstimate(NamedTuple):
    pc: float
    multi_photon_bound: float
    exceeds_unity: bool


def pc_from_photon_statistics(p_n: Sequence[float]) -> PcEstimate:
    """Two-fold coincidence probability Σ_{n≥2} n/2ⁿ (2^{n−1}−1) p_n behind a 50/50 splitter.

    ``multi_photon_bound`` is 2·p_c, which upper-bounds the probability of two
    or more photons. The raw sum is returned even when it exceeds 1, which
    happens for distributions concentrated on n ≥ 3; ``exceeds_unity`` flags it.
    """
    p = np.asarray(p_n, dtype=float)
    if p.ndim != 1:
        raise InvalidDataError("photon-number distribution must be one-dimensional")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidDataError("photon-number probabilities must be finite and non-negative")
    n = np.arange(len(p), dtype=float)
    weights = np.where(n >= 2, n / 2.0**n * (2.0 ** (n - 1) - 1), 0.0)
    pc = float(weights @ p)
    return PcEstimate(pc, 2 * pc, pc > 1.0)


# ---------------------------------------------------------------------------
# algebraic maximum


def z_alg(spec: WitnessSpec) -> float:
    """Algebraic maximum of the witness: Σ |coefficient| over its expanded terms.

    Every displaced-detection observable has operator norm 1 and phase
    averaging cannot increase the norm, so this bounds the witness on any
    state of any photon number (3 for the bipartite Z_2, 33 for Z_3).
    """
    return float(sum(abs(c) for c, _ in witness_terms(spec)))


def z_alg_spectral(spec: WitnessSpec, dim: int = 4) -> float:
    """Largest eigenvalue of the dephased witness on a ``dim``-level truncation.

    This is a lower estimate of the true supremum; it is reported for
    comparison only.
    """
    z = build_witness(spec, [dim] * spec.n_modes).matrix
    return float(np.linalg.eigvalsh(z)[-1])


# ---------------------------------------------------------------------------
# numerical PPT optimizations


def w_statistics_diagonal(n_modes: int) -> np.ndarray:
    """Diagonal of W_N in the qubit basis: 1/N on single-photon states, 0 elsewhere."""
    return w_state(n_modes).diagonal()


def _bipartitions(n_modes: int) -> list[tuple[int, ...]]:
    # one representative per inequivalent size; the witness is permutation symmetric
    return [tuple(range(m)) for m in range(1, n_modes // 2 + 1)]


class _ScaledVariable:
    """ρ = P (D X D) Pᵀ: X lives on the basis states allowed non-zero population.

    States whose population is forced to zero are removed (their rows and
    columns vanish in any PSD solution) and the rest are rescaled by the square
    root of their population cap, so every diagonal entry of X is O(1). The
    congruence preserves positive semidefiniteness and keeps the first-order
    solver well conditioned when populations differ by orders of magnitude.
    """

    def __init__(self, full_dim: int, caps: np.ndarray | None = None):
        self.full_dim = full_dim
        if caps is None:
            self.keep = np.arange(full_dim)
            self.scale = np.ones(full_dim)
        else:
            caps = np.asarray(caps, dtype=float)
            self.keep = np.flatnonzero(caps > 0.0)
            self.scale = np.sqrt(caps[self.keep])
        self.position = {int(i): k for k, i in enumerate(self.keep)}

    @property
    def dim(self) -> int:
        return len(self.keep)

    def embed(self, x: np.ndarray) -> np.ndarray:
        full = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        full[np.ix_(self.keep, self.keep)] = self.scale[:, None] * x * self.scale[None, :]
        return full

    def pull(self, c: np.ndarray) -> np.ndarray:
        """Coefficient matrix on X equivalent to Tr(c ρ)."""
        return self.scale[:, None] * c[np.ix_(self.keep, self.keep)] * self.scale[None, :]

    def diagonal(self, index: int, value: float, sense: str) -> LinearConstraint:
        k = self.position[index]
        a = np.zeros((self.dim, self.dim))
        a[k, k] = 1.0
        return LinearConstraint({"x": a}, value / self.scale[k] ** 2, sense,
                                name=f"rho[{index},{index}] {sense} {value:.6g}")

    def solution(self, sol: SdpSolution) -> SdpSolution:
        return replace(sol, optimizer={"rho": self.embed(sol.optimizer["x"])})


def _pt_constraints(var: _ScaledVariable, dims, subset, block=None, name="partial transpose psd"):
    """PSD constraint on the partial transpose, reduced to the populated face.

    A basis state with zero population has a zero diagonal entry in the
    partial transpose as well, so its whole row must vanish there. Those
    entries are imposed as explicit linear equalities and the PSD constraint
    acts on the remaining principal submatrix, which keeps a strictly
    feasible point available to the solver.
    """
    dims = list(dims)
    subset = list(subset)
    idx = np.arange(var.full_dim) if block is None else np.asarray(block)
    block_dims = dims if block is None else [2] * len(dims)
    nb = len(idx)
    source = _partial_transpose_matrix(np.arange(nb * nb, dtype=float).reshape(nb, nb),
                                       block_dims, subset).real.astype(int)
    alive = np.array([int(i) in var.position for i in idx])
    live = np.flatnonzero(alive)

    # partial transposition leaves the diagonal in place, so the same congruence rescales its image
    inv = 1.0 / np.array([var.scale[var.position[int(idx[b])]] for b in live])

    def mapped(x):
        full = var.embed(x)[np.ix_(idx, idx)]
        pt = _partial_transpose_matrix(full, block_dims, subset)[np.ix_(live, live)]
        return inv[:, None] * pt * inv[None, :]

    out = [PsdConstraint("x", mapped, name=name)]
    forced = set()
    for a in np.flatnonzero(~alive):
        for b in range(nb):
            ra, rb = divmod(int(source[a, b]), nb)
            fa, fb = int(idx[ra]), int(idx[rb])
            if fa == fb or fa not in var.position or fb not in var.position:
                continue
            forced.add(tuple(sorted((var.position[fa], var.position[fb]))))
    for j, k in sorted(forced):
        re = np.zeros((var.dim, var.dim), dtype=complex)
        re[j, k] = re[k, j] = 0.5
        im = np.zeros((var.dim, var.dim), dtype=complex)
        im[j, k], im[k, j] = 0.5j, -0.5j
        out += [LinearConstraint({"x": re}, 0.0, "==", name=f"Re x[{j},{k}] = 0"),
                LinearConstraint({"x": im}, 0.0, "==", name=f"Im x[{j},{k}] = 0")]
    return out


def _correlator_bounds(var: _ScaledVariable, dims, subset, diagonal):
    """|ρ_ab| ≤ sqrt(p_a' p_b') where (a', b') is the partner of (a, b) under partial transposition."""
    space = FockSpace(tuple(dims))
    occ = space.occupations()
    out = []
    for a, b in itertools.combinations(var.keep, 2):
        oa, ob = occ[a].copy(), occ[b].copy()
        oa[subset], ob[subset] = occ[b][subset], occ[a][subset]
        a2, b2 = space.index(oa), space.index(ob)
        if {a2, b2} == {a, b}:
            continue
        bound = float(np.sqrt(max(diagonal[a2], 0.0) * max(diagonal[b2], 0.0)))
        if bound < np.sqrt(diagonal[a] * diagonal[b]):
            ka, kb = var.position[int(a)], var.position[int(b)]
            out.append(ElementBound("x", ka, kb, bound / (var.scale[ka] * var.scale[kb]),
                                    name=f"coherence {a},{b}"))
    return out


def _run(problem: SdpProblem, var: _ScaledVariable, options: dict | None, label: str) -> SdpSolution:
    sol = solve(problem, **{**_SOLVER_DEFAULTS, **(options or {})})
    sol = var.solution(sol)
    if not sol.converged:
        raise NonConvergenceError(f"{label} did not converge", sol)
    return sol


def _check_bipartition(bipartition, n_modes: int) -> list[int]:
    subset = sorted(int(i) for i in bipartition)
    if not subset or len(subset) >= n_modes or subset[0] < 0 or subset[-1] >= n_modes \
            or len(set(subset)) != len(subset):
        raise InvalidArgumentError(f"invalid bipartition {tuple(bipartition)}")
    return subset


def _genuine(results: list[BoundResult], method: str, alpha: float) -> BoundResult:
    best = max(results, key=lambda r: r.value)
    return BoundResult(best.value, "genuine", method, float(alpha), True, best.normalization, best.solution)


def qubit_ppt_bound_sdp(n_modes: int, alpha: float, bipartition: Sequence[int] | str = (0,),
                        diagonal: Sequence[float] | None = None, variant: str = "general",
                        solver_options: dict | None = None) -> BoundResult:
    """Maximum witness value over qubit-subspace states that are PPT across ``bipartition``.

    ``diagonal`` fixes the populations of the qubit basis states (for example
    :func:`w_statistics_diagonal`), which also implies the coherence bounds
    |ρ_ab|² ≤ p_a' p_b' for coherences moved by the partial transpose.
    ``bipartition="genuine"`` returns the maximum over all bipartitions.
    """
    if n_modes > 6:
        raise InvalidArgumentError("the qubit SDP is limited to at most 6 modes")
    if isinstance(bipartition, str):
        if bipartition != "genuine":
            raise InvalidArgumentError(f"unknown bipartition {bipartition!r}")
        parts = [qubit_ppt_bound_sdp(n_modes, alpha, p, diagonal, variant, solver_options)
                 for p in _bipartitions(n_modes)]
        return _genuine(parts, "sdp-qubit", alpha)

    spec = WitnessSpec(n_modes, alpha, variant)
    subset = _check_bipartition(bipartition, n_modes)
    dims = [2] * n_modes
    d = 2**n_modes
    z = build_witness(spec, dims).matrix
    if diagonal is not None:
        diagonal = np.asarray(diagonal, dtype=float)
        if diagonal.shape != (d,) or np.any(diagonal < 0):
            raise InvalidArgumentError(f"diagonal must be {d} non-negative populations")
    var = _ScaledVariable(d, diagonal)
    cons = [PsdConstraint("x", name="rho psd"),
            LinearConstraint({"x": var.pull(np.eye(d))}, 1.0, "==", name="trace"),
            *_pt_constraints(var, dims, subset)]
    if diagonal is not None:
        cons += [var.diagonal(int(i), float(diagonal[i]), "==") for i in var.keep]
        cons += _correlator_bounds(var, dims, subset, diagonal)
    problem = SdpProblem([("x", var.dim)], {"x": var.pull(z)}, cons)
    sol = _run(problem, var, solver_options, "qubit PPT optimization")
    return BoundResult(sol.optimum, tuple(subset), "sdp-qubit", float(alpha), True,
                       spec.normalization, sol)


def qudit_ppt_bound_sdp(stats: ClickStats, alpha: float, bipartition: Sequence[int] | str = "genuine",
                        solver_options: dict | None = None) -> BoundResult:
    """PPT bound without assuming at most one photon per mode.

    Optimizes over subnormalized states with at most two photons per mode,
    whose qubit block is PPT, with populations bounded by the undisplaced
    click table and the coincidence bounds, then adds 2·z_alg·Σp_c for the
    weight outside that space. Two-mode statistics use the bipartite
    normalization, three-mode statistics the general one.
    """
    n = stats.n_modes
    if n not in (2, 3):
        raise InvalidArgumentError("the qudit SDP supports two or three modes")
    if isinstance(bipartition, str):
        if bipartition != "genuine":
            raise InvalidArgumentError(f"unknown bipartition {bipartition!r}")
        parts = [qudit_ppt_bound_sdp(stats, alpha, p, solver_options) for p in _bipartitions(n)]
        return _genuine(parts, "sdp-qudit", alpha)
    subset = _check_bipartition(bipartition, n)

    spec = WitnessSpec(n, alpha, "bipartite" if n == 2 else "general")
    dims = [3] * n
    space = FockSpace(tuple(dims))
    d = space.total_dim
    occ = space.occupations()
    qubit = space.qubit_indices()
    z = build_witness(spec, dims).matrix
    pc = np.asarray(stats.pc)

    # population caps: click probabilities in the qubit sector, 2 p_c for doubly occupied modes
    caps = np.empty(d)
    senses = []
    for i in range(d):
        o = occ[i]
        if (o <= 1).all():
            caps[i] = max(stats.undisplaced["".join("c" if k else "0" for k in o)], 0.0)
            senses.append("==" if not o.any() else "<=")
        else:
            caps[i] = min(2.0 * pc[k] for k in range(n) if o[k] == 2)
            senses.append("<=")
    var = _ScaledVariable(d, caps)
    q_proj = np.zeros((d, d))
    q_proj[qubit, qubit] = 1.0
    cons = [PsdConstraint("x", name="rho psd"),
            LinearConstraint({"x": var.pull(np.eye(d))}, 1.0, "<=", name="trace"),
            *_pt_constraints(var, dims, subset, qubit, "qubit-block partial transpose psd"),
            LinearConstraint({"x": var.pull(q_proj)}, 1.0 - 2.0 * pc.sum(), ">=", name="qubit-block weight")]
    cons += [var.diagonal(int(i), float(caps[i]), senses[i]) for i in var.keep]
    problem = SdpProblem([("x", var.dim)], {"x": var.pull(z)}, cons)
    sol = _run(problem, var, solver_options, "qudit PPT optimization")
    offset = 2.0 * z_alg(spec) * pc.sum()
    return BoundResult(sol.optimum + offset, tuple(subset), "sdp-qudit", float(alpha), True,
                       spec.normalization, sol)
