"""Recognition of segment and unit-disk intersection graphs whose parameters
lie on a scaled simplex."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .domain import Domain, simplex_hull
from .errors import DimensionError, SchemaError
from .formula import And, Atom, Not, Op, Or, tmv_from_monomials
from .solver import SolveRequest

__all__ = [
    "Graph", "SegInstance", "UdgInstance", "PairCheck", "RealizationReport",
    "build_seg_request", "build_udg_request", "check_realization", "graph_from_json",
    "ints_formula", "udg_thresholds",
]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``."""

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a graph needs at least one vertex")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside vertex range")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    def pairs(self):
        """All vertex pairs ``(i, j, is_edge)`` with ``i < j``."""
        for i, j in itertools.combinations(range(self.n), 2):
            yield i, j, (i, j) in self.edges

    @property
    def non_edge_count(self) -> int:
        return self.n * (self.n - 1) // 2 - len(self.edges)


def graph_from_json(obj) -> Graph:
    """``{"n": int, "edges": [[u, v], ...]}`` with 1-based vertices."""
    try:
        n = int(obj["n"])
        edges = [(int(u) - 1, int(v) - 1) for u, v in obj.get("edges", [])]
    except (KeyError, TypeError, ValueError):
        raise SchemaError("expected {n, edges: [[u, v], ...]}", "graph") from None
    try:
        return Graph(n, frozenset(edges))
    except ValueError as exc:
        raise SchemaError(str(exc), "graph.edges") from None


@dataclass(frozen=True)
class SegInstance:
    graph: Graph
    K: float
    eps: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")


@dataclass(frozen=True)
class UdgInstance:
    graph: Graph
    K: float
    eps: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")


# -- segment graphs ----------------------------------------------------------------------

def _lin(dim, parts, const=0.0):
    """Polynomial in ``z`` from ``[(coef, [coordinate, ...]), ...]``."""
    monos = [(c, [("z", k) for k in idx]) for c, idx in parts]
    return tmv_from_monomials(monos, {"z": dim}, const, ("z",))


def _ints_atoms(i, j, dim):
    """Atom pairs of the two INTS branches, as ``(poly, op_branch1, op_branch2)``."""
    ai, bi, aj, bj = 4 * i, 4 * i + 1, 4 * j, 4 * j + 1
    out = [(_lin(dim, [(1.0, [ai]), (-1.0, [aj])]), Op.GE, Op.LE, "A")]
    for v in (i, j):
        cv, dv = 4 * v + 2, 4 * v + 3
        # lower(v) = C_v (A_i - A_j) - (B_j - B_i)
        lower = _lin(dim, [(1.0, [cv, ai]), (-1.0, [cv, aj]), (-1.0, [bj]), (1.0, [bi])])
        # upper(v) = (B_j - B_i) - D_v (A_i - A_j)
        upper = _lin(dim, [(1.0, [bj]), (-1.0, [bi]), (-1.0, [dv, ai]), (1.0, [dv, aj])])
        out.append((lower, Op.LE, Op.GE, f"C{v + 1}"))
        out.append((upper, Op.LE, Op.GE, f"D{v + 1}"))
    return out


def ints_formula(i: int, j: int, n: int):
    """Both branches of the segment-intersection predicate for vertices ``i, j``."""
    parts = _ints_atoms(i, j, 4 * n)
    tag = f"{i + 1}-{j + 1}"
    first = And(tuple(Atom(p, o1, label=f"ints{tag}.{name}") for p, o1, _, name in parts))
    second = And(tuple(Atom(p, o2, label=f"ints{tag}.{name}") for p, _, o2, name in parts))
    return Or((first, second))


def build_seg_request(inst: SegInstance, k, workers: int | None = None) -> SolveRequest:
    """``C_i <= D_i`` for all i, INTS on edges and not-INTS on non-edges.

    The single variable ``z = (A_1, B_1, C_1, D_1, ..., A_n, B_n, C_n, D_n)``
    ranges over the simplex scaled by ``K``.
    """
    n = inst.graph.n
    dim = 4 * n
    blocks = [Atom(_lin(dim, [(1.0, [4 * i + 2]), (-1.0, [4 * i + 3])]), Op.LE,
                   label=f"order{i + 1}") for i in range(n)]
    for i, j, edge in inst.graph.pairs():
        f = ints_formula(i, j, n)
        blocks.append(f if edge else Not(f))
    domain = Domain((("z", simplex_hull(dim, inst.K)),))
    return SolveRequest(And(tuple(blocks)), domain, inst.eps, k, workers=workers)


# -- unit disk graphs ------------------------------------------------------------------------

def udg_thresholds(eps: float):
    """Squared-distance limits ``(edge_below, non_edge_at_least)``."""
    return 4 + 2 * eps + eps ** 2, 4 - 2 * eps + eps ** 2


def _sqdist_poly(i, j, dim, const):
    parts = []
    for off in (0, 1):
        a, b = 2 * i + off, 2 * j + off
        parts += [(1.0, [a, a]), (-2.0, [a, b]), (1.0, [b, b])]
    return _lin(dim, parts, const)


def build_udg_request(inst: UdgInstance, k, workers: int | None = None) -> SolveRequest:
    """Squared center distances against the widened constants, unrelaxed.

    The variable is ``z = (X_1, Y_1, ..., X_n, Y_n)`` on the simplex scaled
    by ``K``.  The eps band lives in the constants, so the atoms are marked
    non-relaxable and the solver's own eps does not widen them again.
    """
    n = inst.graph.n
    dim = 2 * n
    edge_lim, non_lim = udg_thresholds(inst.eps)
    atoms = []
    for i, j, edge in inst.graph.pairs():
        if edge:
            atoms.append(Atom(_sqdist_poly(i, j, dim, -edge_lim), Op.LT, relaxable=False,
                              label=f"edge{i + 1}-{j + 1}"))
        else:
            atoms.append(Atom(_sqdist_poly(i, j, dim, -non_lim), Op.GE, relaxable=False,
                              label=f"nonedge{i + 1}-{j + 1}"))
    domain = Domain((("z", simplex_hull(dim, inst.K)),))
    notes = ("unit-disk atoms carry their eps band in the constants and are not relaxed further",)
    return SolveRequest(And(tuple(atoms)), domain, inst.eps, k, workers=workers, notes=notes)


# -- independent checks ---------------------------------------------------------------------

@dataclass(frozen=True)
class PairCheck:
    i: int
    j: int
    edge: bool
    value: float | None
    passed: bool
    ambiguous: bool = False


@dataclass(frozen=True)
class RealizationReport:
    pairs: tuple
    order_ok: tuple
    passed: bool


def _rel(value, op, eps):
    if op is Op.LE:
        return value <= eps
    if op is Op.LT:
        return value < eps
    if op is Op.GE:
        return value >= -eps
    return value > -eps


def _ints_direct(zi, zj, eps, negate):
    a_i, b_i, c_i, d_i = zi
    a_j, b_j, c_j, d_j = zj
    slope = a_i - a_j
    gap = b_j - b_i
    values = [slope, c_i * slope - gap, gap - d_i * slope, c_j * slope - gap, gap - d_j * slope]
    first = [Op.GE, Op.LE, Op.LE, Op.LE, Op.LE]
    second = [Op.LE, Op.GE, Op.GE, Op.GE, Op.GE]
    if negate:
        return all(any(_rel(v, o.negated, eps) for v, o in zip(values, ops)) for ops in (first, second))
    return any(all(_rel(v, o, eps) for v, o in zip(values, ops)) for ops in (first, second))


def check_realization(kind: str, vector, graph: Graph, eps: float) -> RealizationReport:
    """Recheck a realization with plain arithmetic.

    For ``"udg"`` the value is the squared center distance and ``ambiguous``
    marks distances that satisfy both the edge and the non-edge limit.  For
    ``"seg"`` the value is the x-coordinate where the two supporting lines
    cross (``None`` for parallel lines) and the verdict comes from the
    relaxed intersection predicate.
    """
    z = np.asarray(vector, dtype=float).reshape(-1)
    checks = []
    if kind == "udg":
        if z.shape[0] != 2 * graph.n:
            raise DimensionError(f"expected {2 * graph.n} coordinates, got {z.shape[0]}")
        pts = z.reshape(graph.n, 2)
        edge_lim, non_lim = udg_thresholds(eps)
        for i, j, edge in graph.pairs():
            d2 = float(np.sum((pts[i] - pts[j]) ** 2))
            ok = d2 < edge_lim if edge else d2 >= non_lim
            checks.append(PairCheck(i, j, edge, d2, ok, non_lim <= d2 < edge_lim))
        order = ()
    elif kind == "seg":
        if z.shape[0] != 4 * graph.n:
            raise DimensionError(f"expected {4 * graph.n} coordinates, got {z.shape[0]}")
        segs = z.reshape(graph.n, 4)
        order = tuple(bool(segs[i, 2] - segs[i, 3] <= eps) for i in range(graph.n))
        for i, j, edge in graph.pairs():
            a_i, b_i = segs[i, :2]
            a_j, b_j = segs[j, :2]
            cross = None if a_i == a_j else float((b_j - b_i) / (a_i - a_j))
            ok = _ints_direct(segs[i], segs[j], eps, negate=not edge)
            checks.append(PairCheck(i, j, edge, cross, bool(ok)))
    else:
        raise ValueError(f"unknown realization kind {kind!r}")
    passed = all(c.passed for c in checks) and all(order)
    return RealizationReport(tuple(checks), order, passed)
