"""Displaced-detection observables and the path-entanglement witness operators.

Three witness variants are supported:

``general``
    Z_N for any number of modes: the sum of (N - 2m) S0^{⊗m} ⊗ 1^{⊗N-m} and
    4 S0^{⊗m} ⊗ 1^{⊗N-2-m} ⊗ Sα ⊗ Sα over all distinct mode placements,
    averaged over a common displacement phase.
``bipartite``
    Z_2 = 2 Sα⊗Sα − S0⊗S0, i.e. the general N = 2 operator divided by 2.
``tripartite``
    Z_3 written in its expanded three-mode form. It carries the same
    normalization as ``general`` with N = 3.

Witness operators are built for unit-efficiency detectors; detector
inefficiency is modeled on the state side as loss before the displacement.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from ._tolerances import TOL
from .errors import InvalidArgumentError, InvalidDataError, InvalidParameterError
from .fock import (
    DensityMatrix,
    FockSpace,
    MultiModeOperator,
    _check_dim,
    _displacement_matrix,
    _kron_little_endian,
    dephase_total_number,
)

__all__ = [
    "MeasurementSetting",
    "WitnessSpec",
    "ClickStats",
    "sigma_observable",
    "witness_terms",
    "build_witness",
    "w_state",
    "z_w_analytic",
    "correlator",
    "witness_from_counts",
    "outcome_strings",
    "VARIANTS",
]

VARIANTS = ("general", "bipartite", "tripartite")

# Pattern letters: "I" identity (mode traced out), "0" undisplaced S0, "a" displaced Sα.
_IDENTITY, _UNDISPLACED, _DISPLACED = "I", "0", "a"


@dataclass(frozen=True)
class MeasurementSetting:
    """Displacement amplitude and detector efficiency for one mode."""

    alpha: complex = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameterError(f"detector efficiency must lie in [0, 1], got {self.eta}")


def _padding(alpha: complex) -> int:
    return 40 + int(8 * abs(alpha) ** 2)


@lru_cache(maxsize=256)
def _sigma_matrix(alpha: complex, eta: float, dim: int) -> np.ndarray:
    big = dim + _padding(alpha)
    d = _displacement_matrix(alpha, big)
    no_click = np.power(1.0 - eta, np.arange(big, dtype=float))
    m = d.conj().T @ ((2.0 * no_click - 1.0)[:, None] * d)
    m = m[:dim, :dim]
    m = 0.5 * (m + m.conj().T)
    m.flags.writeable = False
    return m


def sigma_observable(setting: MeasurementSetting, dim: int) -> MultiModeOperator:
    """D†(α) (2 (1-η)^{a†a} - 1) D(α): +1 for no click, -1 for a click.

    The operator is evaluated on a padded truncation and then restricted to
    ``dim`` levels, so its matrix elements between the retained Fock states are
    free of cutoff artefacts.
    """
    dim = _check_dim(dim)
    m = _sigma_matrix(complex(setting.alpha), float(setting.eta), dim)
    return MultiModeOperator(FockSpace((dim,)), m, hermitian=True)


@dataclass(frozen=True)
class WitnessSpec:
    n_modes: int
    alpha: float
    variant: str = "general"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(f"unknown witness variant {self.variant!r}")
        if self.n_modes < 2:
            raise InvalidArgumentError("a witness needs at least two modes")
        if self.variant == "bipartite" and self.n_modes != 2:
            raise InvalidArgumentError("the bipartite witness requires n_modes = 2")
        if self.variant == "tripartite" and self.n_modes != 3:
            raise InvalidArgumentError("the tripartite witness requires n_modes = 3")
        if self.alpha < 0:
            raise InvalidParameterError("alpha must be non-negative")

    @property
    def normalization(self) -> str:
        """``bipartite`` (factor 2 removed) or ``general``; tripartite shares ``general``."""
        return "bipartite" if self.variant == "bipartite" else "general"


def _distinct_placements(pattern: str) -> list[str]:
    return sorted(set("".join(p) for p in itertools.permutations(pattern)))


@lru_cache(maxsize=64)
def _terms(variant: str, n_modes: int) -> tuple[tuple[float, str], ...]:
    if variant == "bipartite":
        base = [(2.0, "aa"), (-1.0, "00")]
    elif variant == "tripartite":
        base = [(1.0, "0II"), (-1.0, "0I0"), (-3.0, "000"), (4.0, "Iaa"), (4.0, "0aa")]
    else:
        n = n_modes
        base = [(float(n - 2 * m), "0" * m + "I" * (n - m)) for m in range(1, n + 1)]
        base += [(4.0, "0" * m + "I" * (n - 2 - m) + "aa") for m in range(n - 1)]
    out = []
    for coeff, pattern in base:
        if coeff == 0.0:
            continue
        out.extend((coeff, p) for p in _distinct_placements(pattern))
    return tuple(out)


def witness_terms(spec: WitnessSpec) -> list[tuple[float, str]]:
    """Expanded (coefficient, pattern) list, one entry per distinct mode placement.

    Pattern character ``i`` describes mode ``i``: ``"I"`` traced out, ``"0"``
    measured without displacement, ``"a"`` measured with displacement α.
    """
    return list(_terms(spec.variant, spec.n_modes))


@lru_cache(maxsize=64)
def _witness_matrix(variant: str, n_modes: int, alpha: float, dims: tuple[int, ...]) -> np.ndarray:
    singles = {}
    for d in set(dims):
        singles[(d, _IDENTITY)] = np.eye(d, dtype=complex)
        singles[(d, _UNDISPLACED)] = _sigma_matrix(0j, 1.0, d)
        singles[(d, _DISPLACED)] = _sigma_matrix(complex(alpha), 1.0, d)
    total = int(np.prod(dims))
    z = np.zeros((total, total), dtype=complex)
    for coeff, pattern in _terms(variant, n_modes):
        z += coeff * _kron_little_endian([singles[(d, c)] for d, c in zip(dims, pattern)])
    space = FockSpace(dims)
    n_tot = space.total_number()
    z[n_tot[:, None] != n_tot[None, :]] = 0.0
    z = 0.5 * (z + z.conj().T)
    z.flags.writeable = False
    return z


def build_witness(spec: WitnessSpec, dims: Sequence[int]) -> MultiModeOperator:
    """Phase-averaged witness operator on the truncated space ``dims``."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != spec.n_modes:
        raise InvalidArgumentError(f"{len(dims)} dims given for a {spec.n_modes}-mode witness")
    m = _witness_matrix(spec.variant, spec.n_modes, float(spec.alpha), dims)
    return MultiModeOperator(FockSpace(dims), m, hermitian=True)


def w_state(n_modes: int, dims: Sequence[int] | None = None) -> DensityMatrix:
    """W_N: N modes coherently sharing a single photon."""
    if n_modes < 2:
        raise InvalidArgumentError("a W state needs at least two modes")
    dims = tuple(dims) if dims is not None else (2,) * n_modes
    if len(dims) != n_modes:
        raise InvalidArgumentError("dims length must equal n_modes")
    space = FockSpace(dims)
    ket = np.zeros(space.total_dim, dtype=complex)
    for i in range(n_modes):
        occ = [0] * n_modes
        occ[i] = 1
        ket[space.index(occ)] = 1.0 / np.sqrt(n_modes)
    return DensityMatrix(space, np.outer(ket, ket.conj()))


def z_w_analytic(n_modes: int, alpha: float) -> float:
    """Closed-form Tr[Z_N W_N] under the general-N normalization."""
    n = n_modes
    x = abs(alpha) ** 2
    return float((2**n - 1) * n + 2 ** (n + 1) * (n - 1) * np.exp(-x) * (x * (4 * np.exp(-x) - 1) - 1))


# ---------------------------------------------------------------------------
# click statistics


def outcome_strings(n_modes: int) -> list[str]:
    """All outcome strings over {'0', 'c'}; character i is the outcome of mode i."""
    return ["".join(s) for s in itertools.product("0c", repeat=n_modes)]


def _validate_table(table: Mapping[str, float], n_modes: int, label: str) -> dict[str, float]:
    keys = outcome_strings(n_modes)
    unknown = set(table) - set(keys)
    if unknown:
        raise InvalidDataError(f"{label}: unknown outcome strings {sorted(unknown)}")
    out = {k: float(table.get(k, 0.0)) for k in keys}
    for k, v in out.items():
        if not -TOL.probability_sum <= v <= 1.0 + TOL.probability_sum or not np.isfinite(v):
            raise InvalidDataError(f"{label}: probability P_{k} = {v} outside [0, 1]")
    total = sum(out.values())
    if abs(total - 1.0) > TOL.probability_sum:
        raise InvalidDataError(f"{label}: probabilities sum to {total!r}, not 1")
    return out


@dataclass(frozen=True)
class ClickStats:
    """Joint click/no-click probabilities and per-mode coincidence bounds.

    ``undisplaced`` is the table measured without any displacement.
    ``displaced`` maps a mode pair ``(i, j)`` to the table measured with the
    displacement applied on modes ``i`` and ``j`` only; for two modes this is
    the single setting ``(0, 1)``. ``pc[i]`` bounds the two-fold coincidence
    probability of mode ``i`` behind a 50/50 splitter.
    """

    n_modes: int
    undisplaced: Mapping[str, float]
    displaced: Mapping[tuple[int, int], Mapping[str, float]] = field(default_factory=dict)
    pc: tuple[float, ...] = ()
    alpha: float | None = None

    def __post_init__(self):
        n = int(self.n_modes)
        if n < 2:
            raise InvalidDataError("click statistics need at least two modes")
        object.__setattr__(self, "undisplaced", _validate_table(self.undisplaced, n, "undisplaced table"))
        disp = {}
        for pair, table in dict(self.displaced).items():
            pair = tuple(sorted(int(p) for p in pair))
            if len(pair) != 2 or pair[0] == pair[1] or not 0 <= pair[0] < pair[1] < n:
                raise InvalidDataError(f"invalid displaced mode pair {pair}")
            disp[pair] = _validate_table(table, n, f"displaced table {pair}")
        object.__setattr__(self, "displaced", disp)
        pc = tuple(float(p) for p in self.pc) if self.pc else (0.0,) * n
        if len(pc) != n:
            raise InvalidDataError(f"expected {n} coincidence bounds, got {len(pc)}")
        if any(not 0.0 <= p <= 0.5 for p in pc):
            raise InvalidDataError(f"coincidence bounds must lie in [0, 1/2], got {pc}")
        object.__setattr__(self, "pc", pc)

    def p(self, outcome: str, pair: tuple[int, int] | None = None) -> float:
        table = self.undisplaced if pair is None else self.displaced[tuple(sorted(pair))]
        return table[outcome]


def correlator(table: Mapping[str, float], modes: Sequence[int]) -> float:
    """E[Π_i s_i] over ``modes`` with s = +1 for no click and -1 for a click.

    Modes outside ``modes`` are marginalized by summing the joint table.
    """
    total = 0.0
    for outcome, prob in table.items():
        sign = 1
        for m in modes:
            if outcome[m] == "c":
                sign = -sign
        total += sign * prob
    return total


def witness_from_counts(stats: ClickStats, spec: WitnessSpec) -> float:
    """Witness value assembled from measured outcome probabilities."""
    if stats.n_modes != spec.n_modes:
        raise InvalidArgumentError("statistics and witness have different numbers of modes")
    value = 0.0
    for coeff, pattern in witness_terms(spec):
        measured = [i for i, c in enumerate(pattern) if c != _IDENTITY]
        displaced = tuple(i for i, c in enumerate(pattern) if c == _DISPLACED)
        if displaced:
            if displaced not in stats.displaced:
                raise InvalidDataError(f"missing the table with displacement on modes {displaced}")
            table = stats.displaced[displaced]
        else:
            table = stats.undisplaced
        value += coeff * correlator(table, measured)
    return float(value)
