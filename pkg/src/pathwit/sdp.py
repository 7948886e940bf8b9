"""Small dense semidefinite optimizer.

Maximizes ``sum_v Re Tr(C_v X_v)`` over Hermitian matrix variables subject to
positive-semidefinite constraints on the variables or on linear images of
them, linear equalities and inequalities, and element magnitude bounds.

The method is ADMM on the consensus form

    maximize  c·x   s.t.  A x = b,   M_k x = z_k,   z_k ∈ K_k

where ``x`` stacks the real (isometric) vectorizations of all variables. The
affine constraints are eliminated with an orthonormal null-space basis, every
cone constraint gets its own copy ``z_k`` and the ``z``-step is a set of
independent projections (eigenvalue clipping for PSD blocks, clipping for
inequalities, radial clipping for element bounds). The penalty parameter is
adapted by residual balancing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from ._tolerances import TOL
from .errors import ContractViolationError, InvalidArgumentError

__all__ = [
    "PsdConstraint",
    "LinearConstraint",
    "ElementBound",
    "SdpProblem",
    "SdpSolution",
    "VerifyReport",
    "trace_constraint",
    "diagonal_constraint",
    "solve",
    "project_psd",
    "verify",
    "hermitian_to_vec",
    "vec_to_hermitian",
]

_SENSES = ("==", "<=", ">=")


@dataclass(frozen=True)
class PsdConstraint:
    """``map(X_var) ⪰ 0``; ``map=None`` constrains the variable itself.

    ``map`` must be linear and send Hermitian matrices to Hermitian matrices.
    """

    var: str
    map: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""


@dataclass(frozen=True)
class LinearConstraint:
    """``sum_v Re Tr(A_v X_v)  (== | <= | >=)  value``."""

    coeffs: Mapping[str, np.ndarray]
    value: float
    sense: str = "=="
    name: str = ""

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise InvalidArgumentError(f"unknown constraint sense {self.sense!r}")


@dataclass(frozen=True)
class ElementBound:
    """``|X_var[row, col]| <= bound``."""

    var: str
    row: int
    col: int
    bound: float
    name: str = ""

    def __post_init__(self):
        if self.bound < 0:
            raise InvalidArgumentError("element bounds must be non-negative")


def trace_constraint(var: str, dim: int, value: float, sense: str = "==") -> LinearConstraint:
    return LinearConstraint({var: np.eye(dim)}, value, sense, name=f"trace({var}) {sense} {value}")


def diagonal_constraint(var: str, dim: int, index: int, value: float, sense: str = "==") -> LinearConstraint:
    a = np.zeros((dim, dim))
    a[index, index] = 1.0
    return LinearConstraint({var: a}, value, sense, name=f"{var}[{index},{index}] {sense} {value:.6g}")


def _is_hermitian(m: np.ndarray, tol: float = TOL.hermitian) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and (
        m.size == 0 or np.max(np.abs(m - m.conj().T)) <= tol * max(1.0, np.abs(m).max()))


@dataclass
class SdpProblem:
    variables: Sequence[tuple[str, int]]
    objective: Mapping[str, np.ndarray]
    constraints: Sequence[PsdConstraint | LinearConstraint | ElementBound] = field(default_factory=list)

    def __post_init__(self):
        self.variables = [(str(n), int(d)) for n, d in self.variables]
        names = [n for n, _ in self.variables]
        if len(set(names)) != len(names):
            raise InvalidArgumentError("duplicate variable names")
        dims = dict(self.variables)
        for name, c in self.objective.items():
            if name not in dims:
                raise InvalidArgumentError(f"objective references undeclared variable {name!r}")
            if np.shape(c) != (dims[name], dims[name]) or not _is_hermitian(c):
                raise ContractViolationError(f"objective coefficient for {name!r} must be Hermitian")
        for con in self.constraints:
            vars_ = con.coeffs.keys() if isinstance(con, LinearConstraint) else [con.var]
            for v in vars_:
                if v not in dims:
                    raise InvalidArgumentError(f"constraint references undeclared variable {v!r}")
            if isinstance(con, LinearConstraint):
                for v, a in con.coeffs.items():
                    if np.shape(a) != (dims[v], dims[v]) or not _is_hermitian(a):
                        raise ContractViolationError("linear constraint coefficients must be Hermitian")
            if isinstance(con, ElementBound):
                d = dims[con.var]
                if not (0 <= con.row < d and 0 <= con.col < d):
                    raise InvalidArgumentError("element bound index out of range")

    @property
    def dims(self) -> dict[str, int]:
        return dict(self.variables)


@dataclass
class SdpSolution:
    optimum: float
    optimizer: dict[str, np.ndarray]
    primal_residual: float
    psd_violation: float
    iterations: int
    converged: bool
    dual_residual: float = float("nan")


# ---------------------------------------------------------------------------
# Hermitian <-> real vector (isometric: Re Tr(A B) = vec(A) · vec(B))


_VEC_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _upper(d: int):
    if d not in _VEC_CACHE:
        _VEC_CACHE[d] = np.triu_indices(d, k=1)
    return _VEC_CACHE[d]


def hermitian_to_vec(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    d = m.shape[0]
    iu = _upper(d)
    off = m[iu]
    return np.concatenate([np.diag(m).real, np.sqrt(2) * off.real, np.sqrt(2) * off.imag])


def vec_to_hermitian(v: np.ndarray, d: int) -> np.ndarray:
    iu = _upper(d)
    k = len(iu[0])
    m = np.zeros((d, d), dtype=complex)
    off = (v[d:d + k] + 1j * v[d + k:]) / np.sqrt(2)
    m[iu] = off
    m = m + m.conj().T
    m[np.diag_indices(d)] = v[:d]
    return m


def project_psd(m: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to zero)."""
    m = np.asarray(m)
    if not _is_hermitian(m, 1e-10):
        raise ContractViolationError("project_psd requires a Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


# ---------------------------------------------------------------------------
# compilation to the consensus form


@dataclass
class _Block:
    kind: str            # "psd", "upper", "lower", "disc", "interval"
    rows: slice
    dim: int = 0         # matrix size for psd blocks
    bound: float = 0.0


class _Compiled:
    def __init__(self, problem: SdpProblem):
        self.problem = problem
        self.offsets = {}
        n = 0
        for name, d in problem.variables:
            self.offsets[name] = (n, d)
            n += d * d
        self.n = n

        self.c = np.zeros(n)
        for name, cm in problem.objective.items():
            self._put(self.c, name, hermitian_to_vec(cm))

        eq_rows, eq_vals = [], []
        m_rows, blocks = [], []
        r = 0
        for con in problem.constraints:
            if isinstance(con, LinearConstraint):
                row = np.zeros(n)
                for name, a in con.coeffs.items():
                    self._put(row, name, hermitian_to_vec(a))
                if con.sense == "==":
                    eq_rows.append(row)
                    eq_vals.append(con.value)
                else:
                    m_rows.append(row[None, :])
                    blocks.append(_Block("upper" if con.sense == "<=" else "lower",
                                         slice(r, r + 1), bound=float(con.value)))
                    r += 1
            elif isinstance(con, PsdConstraint):
                mat, out_dim = self._map_matrix(con)
                m_rows.append(mat)
                blocks.append(_Block("psd", slice(r, r + out_dim * out_dim), dim=out_dim))
                r += out_dim * out_dim
            elif isinstance(con, ElementBound):
                start, d = self.offsets[con.var]
                if con.row == con.col:
                    rows = np.zeros((1, n))
                    rows[0, start + con.row] = 1.0
                    m_rows.append(rows)
                    blocks.append(_Block("interval", slice(r, r + 1), bound=con.bound))
                    r += 1
                else:
                    j, k = sorted((con.row, con.col))
                    iu = _upper(d)
                    pos = int(np.flatnonzero((iu[0] == j) & (iu[1] == k))[0])
                    npairs = len(iu[0])
                    rows = np.zeros((2, n))
                    rows[0, start + d + pos] = 1.0
                    rows[1, start + d + npairs + pos] = 1.0
                    m_rows.append(rows)
                    blocks.append(_Block("disc", slice(r, r + 2), bound=np.sqrt(2) * con.bound))
                    r += 2
            else:
                raise InvalidArgumentError(f"unsupported constraint {con!r}")
        self.M = np.vstack(m_rows) if m_rows else np.zeros((0, n))
        self.blocks = blocks
        self.A = np.array(eq_rows) if eq_rows else np.zeros((0, n))
        self.b = np.array(eq_vals, dtype=float)

    def _put(self, vec: np.ndarray, name: str, values: np.ndarray):
        start, d = self.offsets[name]
        vec[start:start + d * d] += values

    def _map_matrix(self, con: PsdConstraint):
        start, d = self.offsets[con.var]
        if con.map is None:
            mat = np.zeros((d * d, self.n))
            mat[:, start:start + d * d] = np.eye(d * d)
            return mat, d
        probe = con.map(np.zeros((d, d), dtype=complex))
        out_dim = np.shape(probe)[0]
        mat = np.zeros((out_dim * out_dim, self.n))
        for k in range(d * d):
            e = np.zeros(d * d)
            e[k] = 1.0
            image = np.asarray(con.map(vec_to_hermitian(e, d)))
            if not _is_hermitian(image, 1e-12):
                raise ContractViolationError(f"map of constraint {con.name!r} is not Hermitian-preserving")
            mat[:, start + k] = hermitian_to_vec(image)
        return mat, out_dim

    def project(self, w: np.ndarray) -> np.ndarray:
        z = np.empty_like(w)
        for blk in self.blocks:
            seg = w[blk.rows]
            if blk.kind == "psd":
                z[blk.rows] = hermitian_to_vec(_clip_eigs(vec_to_hermitian(seg, blk.dim)))
            elif blk.kind == "upper":
                z[blk.rows] = np.minimum(seg, blk.bound)
            elif blk.kind == "lower":
                z[blk.rows] = np.maximum(seg, blk.bound)
            elif blk.kind == "interval":
                z[blk.rows] = np.clip(seg, -blk.bound, blk.bound)
            else:
                norm = np.hypot(seg[0], seg[1])
                z[blk.rows] = seg if norm <= blk.bound else seg * (blk.bound / norm)
        return z

    def violations(self, x: np.ndarray) -> tuple[float, float]:
        """(max non-PSD violation, max PSD violation) of a primal point."""
        w = self.M @ x
        other, psd = 0.0, 0.0
        if self.A.shape[0]:
            other = float(np.max(np.abs(self.A @ x - self.b)))
        for blk in self.blocks:
            seg = w[blk.rows]
            if blk.kind == "psd":
                lmin = np.linalg.eigvalsh(vec_to_hermitian(seg, blk.dim))[0]
                psd = max(psd, -float(lmin))
            elif blk.kind == "upper":
                other = max(other, float(seg[0] - blk.bound))
            elif blk.kind == "lower":
                other = max(other, float(blk.bound - seg[0]))
            elif blk.kind == "interval":
                other = max(other, float(abs(seg[0]) - blk.bound))
            else:
                other = max(other, float(np.hypot(seg[0], seg[1]) - blk.bound) / np.sqrt(2))
        return max(other, 0.0), max(psd, 0.0)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for name, (start, d) in self.offsets.items():
            out[name] = vec_to_hermitian(x[start:start + d * d], d)
        return out


def _clip_eigs(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    if w[0] >= 0.0:
        return m
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


# ---------------------------------------------------------------------------


def solve(problem: SdpProblem, tolerance: float = 1e-7, max_iterations: int = 200_000,
          relaxation: float = 1.6, check_every: int = 10) -> SdpSolution:
    """Maximize the problem's objective.

    The returned solution is flagged ``converged`` only when the primal point
    violates every non-PSD constraint by less than ``tolerance``, every PSD
    constraint by less than ``tolerance / 10`` in smallest eigenvalue, and the
    dual residual is below ``tolerance``. Runs are deterministic.
    """
    comp = _Compiled(problem)
    n = comp.n

    # eliminate the equality constraints: x = x0 + N y
    if comp.A.shape[0]:
        u_, s, vt = np.linalg.svd(comp.A, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * max(1.0, s.max())))
        x0 = vt[:rank].T @ ((u_[:, :rank].T @ comp.b) / s[:rank])
        null = vt[rank:].T
        if np.max(np.abs(comp.A @ x0 - comp.b), initial=0.0) > 1e-9:
            return SdpSolution(float("nan"), comp.unpack(x0), float("inf"), float("inf"), 0, False)
    else:
        x0 = np.zeros(n)
        null = np.eye(n)
    q = null.shape[1]

    scale = max(1.0, float(np.max(np.abs(comp.c))))
    c_red = null.T @ comp.c / scale
    MN = comp.M @ null
    Mx0 = comp.M @ x0
    K = MN.T @ MN
    sigma = 1e-6

    rho = 1.0
    factor = scipy.linalg.cho_factor(rho * K + sigma * np.eye(q))
    y = np.zeros(q)
    z = comp.project(Mx0)
    u = np.zeros_like(z)
    r_prim = r_dual = float("inf")
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        rhs = c_red - rho * MN.T @ (Mx0 - z + u) + sigma * y
        y = scipy.linalg.cho_solve(factor, rhs)
        w = MN @ y + Mx0
        w_hat = relaxation * w + (1.0 - relaxation) * z
        z_old = z
        z = comp.project(w_hat + u)
        u = u + w_hat - z

        if it % check_every:
            continue
        r_prim = float(np.max(np.abs(w - z), initial=0.0))
        r_dual = float(np.max(np.abs(rho * MN.T @ (z - z_old)), initial=0.0))
        if r_prim < tolerance and r_dual < tolerance:
            other, psd = comp.violations(x0 + null @ y)
            if other < tolerance and psd < tolerance / 10:
                converged = True
                break
        if it % (5 * check_every) == 0:
            if r_prim > 5.0 * r_dual:
                rho *= 2.0
                u /= 2.0
            elif r_dual > 5.0 * r_prim:
                rho /= 2.0
                u *= 2.0
            else:
                continue
            factor = scipy.linalg.cho_factor(rho * K + sigma * np.eye(q))

    x = x0 + null @ y
    other, psd = comp.violations(x)
    return SdpSolution(
        optimum=float(comp.c @ x),
        optimizer=comp.unpack(x),
        primal_residual=other,
        psd_violation=psd,
        iterations=it,
        converged=converged,
        dual_residual=r_dual,
    )


# ---------------------------------------------------------------------------


@dataclass
class VerifyReport:
    objective: float
    residuals: list[tuple[str, float]]

    @property
    def max_residual(self) -> float:
        return max((r for _, r in self.residuals), default=0.0)

    def residual(self, name: str) -> float:
        for label, r in self.residuals:
            if label == name:
                return r
        raise KeyError(name)


def verify(problem: SdpProblem, solution: SdpSolution | Mapping[str, np.ndarray]) -> VerifyReport:
    """Re-evaluate every constraint on a candidate point, independently of the solver.

    Residuals are non-negative violation amounts; equality residuals are
    absolute differences. Each constraint is reported under its ``name`` (or
    a generated label).
    """
    point = solution.optimizer if isinstance(solution, SdpSolution) else solution
    dims = problem.dims
    xs = {}
    for name, d in dims.items():
        x = np.asarray(point[name], dtype=complex)
        if x.shape != (d, d):
            raise InvalidArgumentError(f"variable {name!r} has shape {x.shape}, expected {(d, d)}")
        xs[name] = x
    residuals = []
    for name, x in xs.items():
        residuals.append((f"hermitian({name})", float(np.max(np.abs(x - x.conj().T)))))
    for k, con in enumerate(problem.constraints):
        label = con.name or f"{type(con).__name__}[{k}]"
        if isinstance(con, PsdConstraint):
            x = xs[con.var]
            image = x if con.map is None else np.asarray(con.map(x))
            lmin = float(np.linalg.eigvalsh(0.5 * (image + image.conj().T))[0])
            residuals.append((label, max(0.0, -lmin)))
        elif isinstance(con, LinearConstraint):
            lhs = sum(float(np.real(np.trace(a @ xs[v]))) for v, a in con.coeffs.items())
            if con.sense == "==":
                res = abs(lhs - con.value)
            elif con.sense == "<=":
                res = max(0.0, lhs - con.value)
            else:
                res = max(0.0, con.value - lhs)
            residuals.append((label, res))
        else:
            residuals.append((label, max(0.0, abs(xs[con.var][con.row, con.col]) - con.bound)))
    objective = sum(float(np.real(np.trace(c @ xs[v]))) for v, c in problem.objective.items())
    return VerifyReport(objective, residuals)
