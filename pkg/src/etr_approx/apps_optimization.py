"""Optimization front ends: quadratic programs over the simplex, polynomial
optimization with side constraints, and approximate tensor eigenpairs."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bounds import k_sqp
from .domain import ConvexHull, Domain, GridPoint, count_rows, grid_size, interval_hull, simplex_hull
from .errors import BudgetError, DimensionError
from .formula import And, Atom, Op
from .solver import Objective, Sense, SolveReport, SolveRequest, solve
from .tensor_poly import DenseTensor, StmPolynomial, TmvPolynomial

__all__ = [
    "SqpInstance", "SqpResult", "SqpOracle", "sqp_poly", "solve_sqp", "sqp_oracle", "max_clique",
    "adjacency_matrix", "build_constrained_opt",
    "EigenInstance", "build_eigen_request", "eigen_residuals",
]


def _matrix(A) -> np.ndarray:
    arr = A.data if isinstance(A, DenseTensor) else np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return np.array(arr, dtype=float)


@dataclass(frozen=True)
class SqpInstance:
    """``max x^T A x`` over the probability simplex; entries of ``A`` in [0, 1]."""

    A: np.ndarray
    eps: float = 0.1

    def __post_init__(self):
        arr = _matrix(self.A)
        if np.any(arr < 0) or np.any(arr > 1):
            raise ValueError("SQP matrix entries must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "A", arr)
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def p(self) -> int:
        return self.A.shape[0]


def sqp_poly(A, name: str = "x") -> TmvPolynomial:
    return TmvPolynomial((StmPolynomial(DenseTensor(_matrix(A)), (2,), 0.0, (name,)),))


@dataclass(frozen=True)
class SqpResult:
    value: float
    point: GridPoint
    x: np.ndarray
    k: int
    k_theory: int
    truncated: bool
    report: SolveReport

    @property
    def guarantee_met(self) -> bool:
        """Whether ``k`` reaches the simplex-specific bound for ``eps``."""
        return self.k >= self.k_theory


def solve_sqp(inst: SqpInstance, k: int | None = None, k_cap: int = 200,
              workers: int | None = None) -> SqpResult:
    """Best ``x^T A x`` over the k-uniform simplex grid.

    ``k`` defaults to the simplex bound for ``inst.eps`` capped at ``k_cap``.
    """
    k_theory = k_sqp(inst.eps)
    truncated = False
    if k is None:
        k = min(k_theory, k_cap)
        truncated = k < k_theory
    domain = Domain((("x", simplex_hull(inst.p)),))
    req = SolveRequest(And(()), domain, inst.eps, k, (Objective(sqp_poly(inst.A), Sense.MAX),),
                       workers=workers)
    report = solve(req)
    gp = GridPoint(report.counts("x"), k, domain.hull("x"))
    return SqpResult(report.objective_values[0], gp, report.point("x"), k, k_theory, truncated, report)


def adjacency_matrix(n: int, edges) -> np.ndarray:
    A = np.zeros((n, n))
    for u, v in edges:
        A[u, v] = A[v, u] = 1.0
    return A


def max_clique(A) -> int | None:
    """Clique number of a 0/1 symmetric zero-diagonal matrix, else ``None``."""
    arr = _matrix(A)
    if not (np.array_equal(arr, arr.T) and np.all(np.diag(arr) == 0) and np.all((arr == 0) | (arr == 1))):
        return None
    n = arr.shape[0]
    best = 1 if n else 0
    for size in range(2, n + 1):
        found = any(all(arr[u, v] for u, v in itertools.combinations(c, 2))
                    for c in itertools.combinations(range(n), size))
        if not found:
            break
        best = size
    return best


@dataclass(frozen=True)
class SqpOracle:
    value: float
    counts: tuple
    k: int
    clique: int | None

    @property
    def clique_value(self) -> float | None:
        return None if self.clique is None else 1.0 - 1.0 / self.clique


def sqp_oracle(A, k_fine: int, budget: int = 50_000_000) -> SqpOracle:
    """Maximum of ``beta^T A beta / k^2`` over all count vectors, by plain enumeration."""
    arr = _matrix(A)
    p = arr.shape[0]
    total = grid_size(p, k_fine)
    if total > budget:
        raise BudgetError(f"fine grid has {total} points, budget is {budget}")
    best, best_counts = -np.inf, None
    step = 1 << 16
    for lo in range(0, total, step):
        beta = count_rows(p, k_fine, lo, min(total, lo + step)).astype(float)
        vals = np.einsum("bi,ij,bj->b", beta, arr, beta) / float(k_fine) ** 2
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_counts = float(vals[i]), tuple(int(c) for c in beta[i])
    return SqpOracle(best, best_counts, k_fine, max_clique(arr))


def build_constrained_opt(objective: TmvPolynomial, constraints, domain: Domain, eps, k,
                          sense: Sense = Sense.MAX, workers: int | None = None) -> SolveRequest:
    """Optimize ``objective`` subject to ``h_i(x) >= 0`` for each constraint."""
    atoms = tuple(Atom(h, Op.GE, label=f"h{i + 1}") for i, h in enumerate(constraints))
    return SolveRequest(And(atoms), domain, eps, k, (Objective(objective, sense),), workers=workers)


# -- eigenpairs -------------------------------------------------------------------

@dataclass(frozen=True)
class EigenInstance:
    """Find ``(lam, x)`` with ``sum_ij a(i,j,k) x_i x_j = lam x_k`` for every k."""

    A: np.ndarray
    hull: ConvexHull
    bound: float
    eps: float
    symmetric_lambda: bool = False
    delta: float = 0.5

    def __post_init__(self):
        arr = self.A.data if isinstance(self.A, DenseTensor) else np.asarray(self.A, dtype=float)
        if arr.ndim != 3 or len(set(arr.shape)) != 1:
            raise DimensionError(f"expected a p x p x p tensor, got shape {arr.shape}")
        arr = np.array(arr, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "A", arr)
        if self.hull.dim != arr.shape[0]:
            raise DimensionError(f"hull dimension {self.hull.dim} != tensor size {arr.shape[0]}")
        if not (np.isfinite(self.bound) and self.bound > 0):
            raise ValueError("lambda bound must be positive and finite")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def lambda_hull(self) -> ConvexHull:
        return interval_hull(-self.bound if self.symmetric_lambda else 0.0, self.bound)


def _eigen_atom_poly(A: np.ndarray, kk: int) -> TmvPolynomial:
    p = A.shape[0]
    names = ("lam", "x")
    quad = StmPolynomial(DenseTensor(A[:, :, kk]), (0, 2), 0.0, names)
    lin = np.zeros((1, p))
    lin[0, kk] = -1.0
    return TmvPolynomial((quad, StmPolynomial(DenseTensor(lin), (1, 1), 0.0, names)))


def build_eigen_request(inst: EigenInstance, k, workers: int | None = None) -> SolveRequest:
    """Eigen equations as equality atoms over the domain ``(lam, x)``.

    ``lam`` is the faster-varying variable, so for each grid ``x`` the
    search sweeps ``lam`` upward from the low end of its interval.  A
    non-relaxed atom keeps ``x`` away from zero: ``sum x_i >= delta`` when
    every hull vertex is non-negative and ``sum x_i^2 >= delta^2`` otherwise.
    """
    atoms = [Atom(_eigen_atom_poly(inst.A, kk), Op.EQ, label=f"eig{kk + 1}") for kk in range(inst.p)]
    names = ("lam", "x")
    if np.all(inst.hull.vertices >= 0):
        nz = StmPolynomial(DenseTensor(np.ones(inst.p)), (0, 1), -inst.delta, names)
    else:
        nz = StmPolynomial(DenseTensor(np.eye(inst.p)), (0, 2), -inst.delta ** 2, names)
    atoms.append(Atom(TmvPolynomial((nz,)), Op.GE, relaxable=False, label="nonzero"))
    domain = Domain((("lam", inst.lambda_hull()), ("x", inst.hull)))
    notes = ("equality atoms split into <= and >= pairs",)
    return SolveRequest(And(tuple(atoms)), domain, inst.eps, k, workers=workers, notes=notes)


def eigen_residuals(A, x, lam) -> np.ndarray:
    """``|sum_ij a(i,j,k) x_i x_j - lam x_k|`` for each k."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    lam = float(np.asarray(lam, dtype=float).reshape(-1)[0])
    return np.abs(np.einsum("ijk,i,j->k", A, x, x) - lam * x)
