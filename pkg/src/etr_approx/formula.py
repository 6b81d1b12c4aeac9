"""Boolean formulas over TMV atoms and their exact / epsilon-relaxed semantics.

Every atom compares a polynomial against zero.  Relaxation widens each
comparison by ``eps``::

    p <= 0  ->  p <= eps        p < 0  ->  p < eps
    p >= 0  ->  p >= -eps       p > 0  ->  p > -eps

Negations are pushed to the atoms before relaxing, and equalities are split
into a pair of non-strict inequalities.  Atoms built with
``relaxable=False`` keep their exact comparison whatever ``eps`` is.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import ArithmeticRangeError, DimensionError, SchemaError
from .tensor_poly import (
    DenseTensor,
    StmPolynomial,
    TmvPolynomial,
    constant_poly,
    eval_tmv,
    eval_tmv_batch,
    tmv_from_json,
    tmv_to_json,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Op", "Atom", "And", "Or", "Not",
    "normalize", "atoms", "atom_paths", "count_atoms", "formula_vars",
    "eval_exact", "eval_relaxed", "eval_batch",
    "tmv_from_monomials", "tmv_from_monomials_json",
    "FeasGadget", "build_feas_gadget", "feas_witness",
    "formula_from_json", "formula_to_json",
]


class Op(enum.Enum):
    LT = "lt"
    LE = "le"
    GE = "ge"
    GT = "gt"
    EQ = "eq"

    @property
    def negated(self) -> "Op":
        return _NEGATED[self]

    @property
    def symbol(self) -> str:
        return {"lt": "<", "le": "<=", "ge": ">=", "gt": ">", "eq": "="}[self.value]


_NEGATED = {Op.LT: Op.GE, Op.LE: Op.GT, Op.GE: Op.LT, Op.GT: Op.LE}


@dataclass(frozen=True)
class Atom:
    poly: TmvPolynomial
    op: Op
    relaxable: bool = True
    label: str = ""


@dataclass(frozen=True)
class And:
    children: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Or:
    children: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Not:
    child: object


def normalize(node, diagnostics: list | None = None, _negate: bool = False):
    """Push negations into atoms and split equalities.

    ``diagnostics`` (if given) collects one message per rewritten equality.
    A formula that is already negation- and equality-free comes back
    structurally identical, sharing its atom objects.
    """
    if isinstance(node, Atom):
        if node.op is Op.EQ:
            if diagnostics is not None:
                diagnostics.append(f"equality atom {node.label or '<unlabelled>'} split into <= and >=")
            le = Atom(node.poly, Op.LE, node.relaxable, node.label)
            ge = Atom(node.poly, Op.GE, node.relaxable, node.label)
            if _negate:
                return Or((Atom(node.poly, Op.GT, node.relaxable, node.label),
                           Atom(node.poly, Op.LT, node.relaxable, node.label)))
            return And((le, ge))
        if _negate:
            return Atom(node.poly, node.op.negated, node.relaxable, node.label)
        return node
    if isinstance(node, Not):
        return normalize(node.child, diagnostics, not _negate)
    if isinstance(node, (And, Or)):
        children = tuple(normalize(c, diagnostics, _negate) for c in node.children)
        flip = _negate
        cls = type(node)
        if flip:
            cls = Or if cls is And else And
        if not flip and all(a is b for a, b in zip(children, node.children)):
            return node
        return cls(children)
    raise TypeError(f"not a formula node: {node!r}")


def _is_normal(node) -> bool:
    if isinstance(node, Atom):
        return node.op is not Op.EQ
    if isinstance(node, (And, Or)):
        return all(_is_normal(c) for c in node.children)
    return False


def atoms(node) -> list:
    """Leaf atoms in left-to-right order."""
    return [a for _, a in atom_paths(node)]


def atom_paths(node, prefix: str = ""):
    """Yield ``(path, atom)``; a path like ``and[0]/or[1]`` locates the atom."""
    if isinstance(node, Atom):
        yield prefix or "atom", node
    elif isinstance(node, (And, Or, Not)):
        kind = type(node).__name__.lower()
        kids = node.children if not isinstance(node, Not) else (node.child,)
        for i, child in enumerate(kids):
            yield from atom_paths(child, f"{prefix}/{kind}[{i}]" if prefix else f"{kind}[{i}]")
    else:
        raise TypeError(f"not a formula node: {node!r}")


def count_atoms(node) -> int:
    return sum(1 for _ in atom_paths(node))


def formula_vars(node) -> dict:
    """Variable name -> dimension over all atoms."""
    dims = {}
    for atom in atoms(node):
        for name, dim in atom.poly.var_dims().items():
            if dims.setdefault(name, dim) != dim:
                raise DimensionError(
                    f"variable {name!r} used with dimensions {dims[name]} and {dim}", variable=name)
    return dims


# -- semantics ----------------------------------------------------------------

def _compare(op: Op, value, eps, guard):
    if op is Op.LE:
        return value <= eps + guard
    if op is Op.LT:
        return value < eps
    if op is Op.GE:
        return value >= -eps - guard
    if op is Op.GT:
        return value > -eps
    raise ValueError("equality atoms must be normalized away before evaluation")


def _atom_threshold(atom: Atom, eps):
    return eps if atom.relaxable else 0 * eps


def _eval_node(node, atom_value, eps, guard):
    if isinstance(node, Atom):
        return bool(_compare(node.op, atom_value(node), _atom_threshold(node, eps), guard))
    if isinstance(node, And):
        return all(_eval_node(c, atom_value, eps, guard) for c in node.children)
    if isinstance(node, Or):
        return any(_eval_node(c, atom_value, eps, guard) for c in node.children)
    raise TypeError(f"unexpected node {node!r}")


def eval_relaxed(node, assignment: Mapping, eps, guard=0.0, exact: bool = False) -> bool:
    """Truth of the eps-relaxed formula at one assignment.

    ``guard`` loosens non-strict comparisons by a further fixed amount and is
    meant for checking externally supplied floating-point solutions.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if not _is_normal(node):
        node = normalize(node)
    if exact:
        eps, guard = Fraction(eps), Fraction(guard)
    values = {}

    def atom_value(atom):
        key = id(atom.poly)
        if key not in values:
            values[key] = eval_tmv(atom.poly, assignment, exact=exact)
        return values[key]

    return _eval_node(node, atom_value, eps, guard)


def eval_exact(node, assignment: Mapping, guard=0.0, exact: bool = False) -> bool:
    return eval_relaxed(node, assignment, 0, guard, exact)


def eval_batch(node, batch: Mapping[str, np.ndarray], eps: float, cache: dict | None = None,
               guard: float = 0.0) -> np.ndarray:
    """Vectorized :func:`eval_relaxed` over ``B`` points (normalized input)."""
    if cache is None:
        cache = {}
    if isinstance(node, Atom):
        key = id(node.poly)
        if key not in cache:
            cache[key] = eval_tmv_batch(node.poly, batch)
        return _compare(node.op, cache[key], eps if node.relaxable else 0.0, guard)
    if isinstance(node, (And, Or)):
        rows = next(iter(batch.values())).shape[0] if batch else 1
        if not node.children:
            return np.full(rows, isinstance(node, And))
        result = None
        for child in node.children:
            value = eval_batch(child, batch, eps, cache, guard)
            if result is None:
                result = value.copy()
            elif isinstance(node, And):
                result &= value
            else:
                result |= value
        return result
    raise TypeError(f"unexpected node {node!r}")


# -- monomial input -------------------------------------------------------------

def tmv_from_monomials(monomials, var_dims: Mapping[str, int], constant=0,
                       var_names=None, merge: bool = True) -> TmvPolynomial:
    """Compile ``[(coef, [(var, index), ...]), ...]`` into one-hot STM terms.

    Each factor ``(var, i)`` contributes coordinate ``i`` (0-based) of vector
    variable ``var``; repeating a factor raises its power.  With ``merge``
    the monomials sharing an exponent pattern are summed into one tensor.
    """
    names = tuple(var_names) if var_names is not None else tuple(var_dims)
    exact = isinstance(constant, Fraction) or any(isinstance(c, Fraction) for c, _ in monomials)
    groups: dict = {}
    order = []
    for coef, factors in monomials:
        by_var = {n: [] for n in names}
        for var, index in factors:
            if var not in by_var:
                raise ValueError(f"unknown variable {var!r} in monomial")
            if not 0 <= index < var_dims[var]:
                raise DimensionError(f"index {index} out of range for {var!r}", variable=var)
            by_var[var].append(int(index))
        exps = tuple(len(by_var[n]) for n in names)
        coord = tuple(i for n in names for i in sorted(by_var[n]))
        key = exps if merge else len(order)
        if key not in groups:
            groups[key] = (exps, [])
            order.append(key)
        groups[key][1].append((coord, coef))
    terms = []
    for key in order:
        exps, coords = groups[key]
        shape = tuple(var_dims[n] for n, e in zip(names, exps) for _ in range(e))
        if exact:
            coords = [(c, Fraction(v)) for c, v in coords]
        tensor = DenseTensor.from_coords(shape, coords)
        terms.append(StmPolynomial(tensor, exps, 0, names))
    if not terms:
        return constant_poly(constant, names)
    head = terms[0]
    terms[0] = StmPolynomial(head.tensor, head.exponents, constant, names)
    return TmvPolynomial(tuple(terms))


def tmv_from_monomials_json(obj, field="poly", var_dims=None) -> TmvPolynomial:
    """``{"monomials": [{"coef", "factors": [[var, i], ...]}], "const", "dims"}``; 1-based."""
    monos = []
    inferred: dict = {}
    for n, m in enumerate(obj["monomials"]):
        try:
            coef = m["coef"]
            factors = [(str(v), int(i) - 1) for v, i in m.get("factors", [])]
        except (KeyError, TypeError, ValueError):
            raise SchemaError("expected {coef, factors}", f"{field}.monomials[{n}]") from None
        if isinstance(coef, str):
            coef = Fraction(coef)
        for v, i in factors:
            if i < 0:
                raise SchemaError("indices are 1-based", f"{field}.monomials[{n}]")
            inferred[v] = max(inferred.get(v, 0), i + 1)
        monos.append((coef, factors))
    dims = dict(inferred)
    dims.update(var_dims or {})
    dims.update({k: int(v) for k, v in obj.get("dims", {}).items()})
    const = obj.get("const", 0)
    if isinstance(const, str):
        const = Fraction(const)
    names = obj.get("vars") or list(dims)
    try:
        return tmv_from_monomials(monos, dims, const, names)
    except (ValueError, DimensionError) as exc:
        raise SchemaError(str(exc), field) from None


# -- repeated-squaring gadget ---------------------------------------------------

FLOAT_MAX_LEVEL = 4
EXACT_MAX_LEVEL = 12


@dataclass(frozen=True)
class FeasGadget:
    """Relaxed constraints forcing ``t >= eps * 2**(2**(level + 5))``."""

    formula: And
    threshold: float | Fraction
    level: int
    eps: float | Fraction
    variables: tuple


def _scalar_monomial_poly(monos, names, constant):
    return tmv_from_monomials(monos, {n: 1 for n in names}, constant, names, merge=True)


def build_feas_gadget(level: int, eps, exact: bool = False) -> FeasGadget:
    """Chain ``g_1 >= 2 + eps``, ``g_j >= g_{j-1}^2 + eps``, ``t >= eps*g_last + eps``.

    Under eps-relaxation the chain forces ``g_1 >= 2`` and ``g_j >= g_{j-1}^2``,
    so ``t`` must reach ``eps * 2**(2**(level + 5))``.  Float arithmetic
    holds that only up to ``level = 4``.
    """
    level = int(level)
    if level < 0:
        raise ValueError("level must be non-negative")
    limit = EXACT_MAX_LEVEL if exact else FLOAT_MAX_LEVEL
    if level > limit:
        raise ArithmeticRangeError(
            f"2**(2**{level + 5}) is not representable in {'exact' if exact else 'float'} mode "
            f"(max level {limit})")
    if eps <= 0:
        raise ValueError("eps must be positive")
    one = Fraction(1) if exact else 1.0
    eps = Fraction(eps) if exact else float(eps)
    count = level + 6
    gs = [f"g{j}" for j in range(1, count + 1)]
    atoms_ = [Atom(_scalar_monomial_poly([(one, [("g1", 0)])], ("g1",), -(2 + eps)), Op.GE,
                   label="g1")]
    for j in range(2, count + 1):
        cur, prev = gs[j - 1], gs[j - 2]
        poly = _scalar_monomial_poly([(one, [(cur, 0)]), (-one, [(prev, 0), (prev, 0)])],
                                     (cur, prev), -eps)
        atoms_.append(Atom(poly, Op.GE, label=cur))
    poly = _scalar_monomial_poly([(one, [("t", 0)]), (-eps, [(gs[-1], 0)])], ("t", gs[-1]), -eps)
    atoms_.append(Atom(poly, Op.GE, label="t"))
    power = 2 ** (2 ** (level + 5))
    threshold = eps * power if exact else eps * float(power)
    return FeasGadget(And(tuple(atoms_)), threshold, level, eps, ("t", *gs))


def feas_witness(level: int, eps, exact: bool = False) -> dict:
    """Tightest assignment of the gadget: ``g_j = 2**(2**(j-1))``, ``t = eps*g_last``."""
    gadget = build_feas_gadget(level, eps, exact)
    out = {}
    for j in range(1, level + 7):
        g = 2 ** (2 ** (j - 1))
        out[f"g{j}"] = [Fraction(g) if exact else float(g)]
    out["t"] = [gadget.threshold]
    return out


# -- JSON -----------------------------------------------------------------------

def _node_from_json(obj, field, var_dims):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise SchemaError("expected exactly one of and/or/not/atom", field)
    (kind, body), = obj.items()
    if kind in ("and", "or"):
        if not isinstance(body, list):
            raise SchemaError("expected a list", f"{field}.{kind}")
        kids = tuple(_node_from_json(c, f"{field}.{kind}[{i}]", var_dims) for i, c in enumerate(body))
        return And(kids) if kind == "and" else Or(kids)
    if kind == "not":
        return Not(_node_from_json(body, f"{field}.not", var_dims))
    if kind == "atom":
        try:
            op = Op(body["op"])
        except (KeyError, ValueError):
            raise SchemaError("op must be one of le|lt|ge|gt|eq", f"{field}.atom.op") from None
        if "poly" not in body:
            raise SchemaError("missing key", f"{field}.atom.poly")
        pobj = body["poly"]
        if isinstance(pobj, dict) and "monomials" in pobj:
            poly = tmv_from_monomials_json(pobj, f"{field}.atom.poly", var_dims)
        else:
            poly = tmv_from_json(pobj, f"{field}.atom.poly")
        for name, dim in poly.var_dims().items():
            if var_dims and name in var_dims and var_dims[name] != dim:
                raise SchemaError(f"variable {name!r} declared with p={var_dims[name]}, used with {dim}",
                                  f"{field}.atom.poly")
        return Atom(poly, op, bool(body.get("relaxable", True)), str(body.get("label", "")))
    raise SchemaError(f"unknown node kind {kind!r}", field)


def formula_from_json(obj):
    """Parse ``{"vars": [{"name", "p"}], "tree": {...}}``; negations are kept."""
    if not isinstance(obj, dict) or "tree" not in obj:
        raise SchemaError("missing key", "tree")
    var_dims = {}
    for i, v in enumerate(obj.get("vars", [])):
        try:
            var_dims[str(v["name"])] = int(v["p"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError("expected {name, p}", f"vars[{i}]") from None
    return _node_from_json(obj["tree"], "tree", var_dims)


def _node_to_json(node):
    if isinstance(node, Atom):
        body = {"poly": tmv_to_json(node.poly), "op": node.op.value}
        if not node.relaxable:
            body["relaxable"] = False
        if node.label:
            body["label"] = node.label
        return {"atom": body}
    if isinstance(node, Not):
        return {"not": _node_to_json(node.child)}
    kind = "and" if isinstance(node, And) else "or"
    return {kind: [_node_to_json(c) for c in node.children]}


def formula_to_json(node) -> dict:
    dims = formula_vars(node)
    return {"vars": [{"name": n, "p": p} for n, p in dims.items()], "tree": _node_to_json(node)}
