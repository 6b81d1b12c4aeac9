"""Approximate solutions of constrained eps-relaxed polynomial systems by
k-uniform grid search over convex hulls."""

__version__ = "0.1.0"

from .domain import ConvexHull, Domain, GridPoint, enumerate_k_uniform, nearest_k_uniform, realize, simplex_hull
from .errors import (ArithmeticRangeError, BudgetError, DimensionError, EtrError, SchemaError,
                     UnassignedVariableError)
from .formula import And, Atom, Not, Op, Or, build_feas_gadget, eval_exact, eval_relaxed, normalize
from .solver import Objective, Sense, SolveReport, SolveRequest, Verdict, solve, verify
from .tensor_poly import DenseTensor, StmPolynomial, TmvPolynomial, eval_stm, eval_tmv, poly_stats

__all__ = [
    "ConvexHull", "Domain", "GridPoint", "enumerate_k_uniform", "nearest_k_uniform", "realize",
    "simplex_hull", "ArithmeticRangeError", "BudgetError", "DimensionError", "EtrError",
    "SchemaError", "UnassignedVariableError", "And", "Atom", "Not", "Op", "Or", "build_feas_gadget",
    "eval_exact", "eval_relaxed", "normalize", "Objective", "Sense", "SolveReport", "SolveRequest",
    "Verdict", "solve", "verify", "DenseTensor", "StmPolynomial", "TmvPolynomial", "eval_stm",
    "eval_tmv", "poly_stats",
]
