"""Truncated Fock-space linear algebra.

Multi-mode operators are dense matrices on the tensor product of per-mode
truncated Fock spaces. Basis ordering is little-endian over modes: mode 0
varies fastest, so the basis index of ``|n_0, n_1, ..., n_{N-1}>`` is
``n_0 + d_0 * (n_1 + d_1 * (n_2 + ...))``.

Modes are addressed with 0-based indices throughout the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from ._tolerances import TOL
from .errors import (
    ContractViolationError,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidParameterError,
    ShapeError,
)

__all__ = [
    "FockSpace",
    "MultiModeOperator",
    "DensityMatrix",
    "annihilation",
    "number_operator",
    "displacement_operator",
    "beam_splitter",
    "tensor",
    "embed",
    "partial_trace",
    "partial_transpose",
    "dephase_total_number",
    "thermal_state",
    "thermal_distribution",
    "coherent_ket",
    "fock_ket",
    "pure_state",
    "expectation",
    "compress",
]


@dataclass(frozen=True)
class FockSpace:
    """Tensor product of truncated single-mode Fock spaces.

    Mode ``i`` holds photon numbers ``0 .. dims[i] - 1``.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidDimensionError("a Fock space needs at least one mode")
        if any(d < 2 for d in dims):
            raise InvalidDimensionError(f"every mode dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def occupations(self) -> np.ndarray:
        """Array of shape (total_dim, n_modes): photon number of each mode per basis index."""
        idx = np.arange(self.total_dim)
        out = np.empty((self.total_dim, self.n_modes), dtype=int)
        for mode, d in enumerate(self.dims):
            out[:, mode] = idx % d
            idx = idx // d
        return out

    def total_number(self) -> np.ndarray:
        return self.occupations().sum(axis=1)

    def index(self, occupation: Sequence[int]) -> int:
        if len(occupation) != self.n_modes:
            raise InvalidArgumentError("occupation length does not match the number of modes")
        idx, stride = 0, 1
        for n, d in zip(occupation, self.dims):
            if not 0 <= n < d:
                raise InvalidArgumentError(f"photon number {n} outside truncation {d}")
            idx += n * stride
            stride *= d
        return idx

    def qubit_indices(self) -> np.ndarray:
        """Basis indices with at most one photon per mode, in little-endian qubit order."""
        return np.flatnonzero((self.occupations() <= 1).all(axis=1))


def _check_square(matrix: np.ndarray, space: FockSpace) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    n = space.total_dim
    if matrix.shape != (n, n):
        raise ShapeError(f"matrix shape {matrix.shape} does not match space dimension {n}")
    return matrix


def _hermitian_deviation(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class MultiModeOperator:
    """Dense operator on a :class:`FockSpace`.

    ``hermitian=True`` asserts Hermiticity at construction time.
    """

    space: FockSpace
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = _check_square(self.matrix, self.space).copy()
        if self.hermitian and _hermitian_deviation(m) >= TOL.hermitian * max(1.0, np.abs(m).max()):
            raise ContractViolationError("operator flagged Hermitian is not Hermitian")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    def is_hermitian(self, tol: float = TOL.hermitian) -> bool:
        return _hermitian_deviation(self.matrix) < tol * max(1.0, np.abs(self.matrix).max())

    def dagger(self) -> "MultiModeOperator":
        return MultiModeOperator(self.space, self.matrix.conj().T, self.hermitian)

    def __matmul__(self, other: "MultiModeOperator") -> "MultiModeOperator":
        if other.space != self.space:
            raise ShapeError("operators live on different spaces")
        return MultiModeOperator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "MultiModeOperator") -> "MultiModeOperator":
        if other.space != self.space:
            raise ShapeError("operators live on different spaces")
        return MultiModeOperator(self.space, self.matrix + other.matrix,
                                 self.hermitian and other.hermitian)

    def __sub__(self, other: "MultiModeOperator") -> "MultiModeOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "MultiModeOperator":
        keep = self.hermitian and np.isreal(scalar)
        return MultiModeOperator(self.space, scalar * self.matrix, bool(keep))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite operator with ``0 < trace <= 1``.

    Subnormalized states are allowed; the qudit bound optimizes over them.
    """

    space: FockSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _check_square(self.matrix, self.space)
        if _hermitian_deviation(m) >= TOL.hermitian:
            raise ContractViolationError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = float(np.trace(m).real)
        if not 0.0 < tr <= 1.0 + TOL.trace_slack:
            raise ContractViolationError(f"density matrix trace {tr} outside (0, 1]")
        lmin = float(np.linalg.eigvalsh(m).min())
        if lmin < TOL.psd_slack:
            raise ContractViolationError(f"density matrix has eigenvalue {lmin} < 0")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def as_operator(self) -> MultiModeOperator:
        return MultiModeOperator(self.space, self.matrix, hermitian=True)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()


# ---------------------------------------------------------------------------
# single-mode building blocks


def _check_dim(dim: int) -> int:
    dim = int(dim)
    if dim < 2:
        raise InvalidDimensionError(f"truncation dimension must be >= 2, got {dim}")
    return dim


def _annihilation_matrix(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def annihilation(dim: int) -> MultiModeOperator:
    dim = _check_dim(dim)
    return MultiModeOperator(FockSpace((dim,)), _annihilation_matrix(dim))


def number_operator(dim: int) -> MultiModeOperator:
    dim = _check_dim(dim)
    return MultiModeOperator(FockSpace((dim,)), np.diag(np.arange(dim)).astype(complex), True)


def _expm_antihermitian(gen: np.ndarray) -> np.ndarray:
    """exp(gen) for anti-Hermitian ``gen`` through the eigendecomposition of i*gen."""
    h = 1j * gen
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def _displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    a = _annihilation_matrix(dim)
    return _expm_antihermitian(alpha * a.conj().T - np.conj(alpha) * a)


def displacement_operator(alpha: complex, dim: int) -> MultiModeOperator:
    """D(alpha) = exp(alpha a^dag - alpha^* a) in a ``dim``-level truncation.

    The generator is truncated first and then exponentiated, so the result is
    exactly unitary but deviates from the true displacement near the cutoff.
    Use :func:`compress` on a larger space when exact low-lying matrix elements
    are needed.
    """
    dim = _check_dim(dim)
    return MultiModeOperator(FockSpace((dim,)), _displacement_matrix(alpha, dim))


def beam_splitter(transmittivity: float, dim_a: int, dim_b: int) -> MultiModeOperator:
    """Two-mode unitary with a^dag -> sqrt(R) a^dag + sqrt(T) b^dag, R = 1 - T.

    Mode a is mode 0 of the returned two-mode space. The generator conserves
    total photon number, so it is exponentiated sector by sector; sectors that
    fit entirely inside the truncation are treated exactly.
    """
    t = float(transmittivity)
    if not 0.0 <= t <= 1.0:
        raise InvalidParameterError(f"transmittivity must lie in [0, 1], got {t}")
    dim_a, dim_b = _check_dim(dim_a), _check_dim(dim_b)
    space = FockSpace((dim_a, dim_b))
    theta = np.arcsin(np.sqrt(t))
    occ = space.occupations()
    total = occ.sum(axis=1)
    u = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for n in np.unique(total):
        idx = np.flatnonzero(total == n)
        pos = {int(occ[i, 0]): k for k, i in enumerate(idx)}
        gen = np.zeros((len(idx), len(idx)), dtype=complex)
        # generator theta * (a b^dag - a^dag b)
        for k, i in enumerate(idx):
            na, nb = occ[i]
            if na >= 1 and nb + 1 < dim_b and (na - 1) in pos:
                gen[pos[na - 1], k] += theta * np.sqrt(na * (nb + 1))
            if nb >= 1 and na + 1 < dim_a and (na + 1) in pos:
                gen[pos[na + 1], k] -= theta * np.sqrt(nb * (na + 1))
        block = _expm_antihermitian(gen) if len(idx) > 1 else np.eye(1, dtype=complex)
        u[np.ix_(idx, idx)] = block
    return MultiModeOperator(space, u)


# ---------------------------------------------------------------------------
# tensor structure


def _kron_little_endian(mats: Sequence[np.ndarray]) -> np.ndarray:
    # np.kron puts its first factor on the slowest index
    return reduce(np.kron, list(mats)[::-1])


def tensor(ops: Sequence[MultiModeOperator]) -> MultiModeOperator:
    """Tensor product with ``ops[0]`` on the lowest mode indices."""
    ops = list(ops)
    if not ops:
        raise InvalidArgumentError("tensor needs at least one operator")
    dims = tuple(d for op in ops for d in op.dims)
    herm = all(op.hermitian for op in ops)
    return MultiModeOperator(FockSpace(dims), _kron_little_endian([op.matrix for op in ops]), herm)


def embed(op: MultiModeOperator, modes: Sequence[int] | int, space: FockSpace) -> MultiModeOperator:
    """Place an operator acting on ``modes`` (in order) into ``space``; identity elsewhere."""
    if isinstance(modes, (int, np.integer)):
        modes = [int(modes)]
    modes = list(modes)
    if len(modes) != op.space.n_modes or len(set(modes)) != len(modes):
        raise InvalidArgumentError("modes do not match the operator")
    if any(not 0 <= m < space.n_modes for m in modes):
        raise InvalidArgumentError(f"modes {modes} out of range")
    if tuple(space.dims[m] for m in modes) != op.dims:
        raise ShapeError("operator dimensions do not match the target modes")
    n = space.n_modes
    rest = [m for m in range(n) if m not in modes]
    rest_dim = int(np.prod([space.dims[m] for m in rest])) if rest else 1
    # operator ⊗ identity in the order (modes..., rest...), then permute to natural order
    full = _kron_little_endian([op.matrix, np.eye(rest_dim)])
    order = modes + rest
    local_dims = [space.dims[m] for m in order]
    t = _to_tensor(full, local_dims)
    inverse = np.argsort(order)
    t = t.transpose(list(inverse) + [n + i for i in inverse])
    return MultiModeOperator(space, _from_tensor(t, space.dims), op.hermitian)


def _to_tensor(m: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Reshape to axes (row mode 0..N-1, column mode 0..N-1)."""
    n = len(dims)
    rev = list(dims)[::-1]
    t = m.reshape(rev + rev)
    perm = [n - 1 - k for k in range(n)] + [2 * n - 1 - k for k in range(n)]
    return t.transpose(perm)


def _from_tensor(t: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    n = len(dims)
    perm = [n - 1 - k for k in range(n)] + [2 * n - 1 - k for k in range(n)]
    d = int(np.prod(dims))
    return np.ascontiguousarray(t.transpose(perm)).reshape(d, d)


def _mode_subset(subset: Iterable[int], n_modes: int) -> list[int]:
    subset = sorted({int(s) for s in subset})
    if not subset:
        raise InvalidArgumentError("mode subset must not be empty")
    if subset[0] < 0 or subset[-1] >= n_modes:
        raise InvalidArgumentError(f"mode subset {subset} out of range for {n_modes} modes")
    return subset


def partial_trace(rho: DensityMatrix | MultiModeOperator, keep: Iterable[int]):
    """Trace out every mode not in ``keep``. Kept modes stay in ascending order."""
    keep = _mode_subset(keep, rho.space.n_modes)
    dims = list(rho.dims)
    t = _to_tensor(rho.matrix, dims)
    n = len(dims)
    for mode in reversed(range(n)):
        if mode in keep:
            continue
        t = np.trace(t, axis1=mode, axis2=mode + n)
        n -= 1
    kept = tuple(dims[m] for m in keep)
    out = _from_tensor(t, kept)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(FockSpace(kept), out)
    return MultiModeOperator(FockSpace(kept), out, rho.hermitian)


def _partial_transpose_matrix(m: np.ndarray, dims: Sequence[int], subset: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = _to_tensor(m, dims)
    for mode in subset:
        t = t.swapaxes(mode, mode + n)
    return _from_tensor(t, dims)


def partial_transpose(rho: DensityMatrix | MultiModeOperator, subset: Iterable[int]) -> MultiModeOperator:
    """Transpose the indices of the modes in ``subset`` (a non-empty proper subset)."""
    n = rho.space.n_modes
    subset = _mode_subset(subset, n)
    if len(subset) == n:
        raise InvalidArgumentError("partial transpose over all modes is a full transpose")
    herm = isinstance(rho, DensityMatrix) or rho.hermitian
    return MultiModeOperator(rho.space, _partial_transpose_matrix(rho.matrix, rho.dims, subset), herm)


def dephase_total_number(op):
    """Average over a common phase rotation: drop coherences between total-number sectors."""
    total = op.space.total_number()
    m = np.where(total[:, None] == total[None, :], op.matrix, 0.0)
    if isinstance(op, DensityMatrix):
        return DensityMatrix(op.space, m)
    return MultiModeOperator(op.space, m, op.hermitian)


def compress(matrix: np.ndarray, big_dims: Sequence[int], small_dims: Sequence[int]) -> np.ndarray:
    """Restrict a matrix on ``big_dims`` to the lower photon numbers of ``small_dims``."""
    big = FockSpace(tuple(big_dims))
    occ = big.occupations()
    keep = np.flatnonzero((occ < np.asarray(small_dims)).all(axis=1))
    return matrix[np.ix_(keep, keep)]


# ---------------------------------------------------------------------------
# states


def thermal_distribution(nbar: float, dim: int) -> np.ndarray:
    """Geometric photon-number distribution n̄^n/(1+n̄)^(n+1), renormalized on ``dim`` levels."""
    if nbar < 0:
        raise InvalidParameterError(f"mean photon number must be >= 0, got {nbar}")
    n = np.arange(dim)
    if nbar == 0:
        p = (n == 0).astype(float)
    else:
        ratio = nbar / (1.0 + nbar)
        p = ratio ** n / (1.0 + nbar)
    return p / p.sum()


def thermal_state(nbar: float, dim: int) -> DensityMatrix:
    dim = _check_dim(dim)
    p = thermal_distribution(nbar, dim)
    return DensityMatrix(FockSpace((dim,)), np.diag(p).astype(complex))


def coherent_ket(alpha: complex, dim: int) -> np.ndarray:
    """Fock amplitudes e^{-|α|²/2} α^n / sqrt(n!) for n < dim (not renormalized)."""
    amps = np.empty(dim, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def fock_ket(space: FockSpace, occupation: Sequence[int]) -> np.ndarray:
    v = np.zeros(space.total_dim, dtype=complex)
    v[space.index(occupation)] = 1.0
    return v


def pure_state(space: FockSpace, ket: np.ndarray, normalize: bool = True) -> DensityMatrix:
    ket = np.asarray(ket, dtype=complex)
    if ket.shape != (space.total_dim,):
        raise ShapeError("ket length does not match the space")
    if normalize:
        ket = ket / np.linalg.norm(ket)
    return DensityMatrix(space, np.outer(ket, ket.conj()))


def expectation(op: MultiModeOperator, rho: DensityMatrix) -> float:
    """Real expectation value Tr(op rho) of a Hermitian operator."""
    if op.space != rho.space:
        raise ShapeError(f"operator dims {op.dims} do not match state dims {rho.dims}")
    if not (op.hermitian or op.is_hermitian()):
        raise ContractViolationError("expectation requires a Hermitian operator")
    value = np.einsum("ij,ji->", op.matrix, rho.matrix)
    if abs(value.imag) > TOL.imag_residue:
        raise ContractViolationError(f"expectation has imaginary residue {value.imag}")
    return float(value.real)
