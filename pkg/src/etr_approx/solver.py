"""Grid search over the k-uniform points of a product of hulls.

Without objectives the search returns the first grid point, in joint colex
order, at which the eps-relaxed formula holds.  With objectives it scans the
whole grid and returns the lexicographic optimum over feasible points,
breaking ties by the smaller grid index.  Both reductions depend only on
grid indices and per-point values, so any number of workers gives the same
answer.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .bounds import k_main
from .domain import Domain, GridPoint, realize
from .errors import DimensionError
from .formula import And, Atom, Op, atom_paths, eval_batch, formula_vars, normalize
from .tensor_poly import TmvPolynomial, eval_tmv, eval_tmv_batch, poly_stats

logger = logging.getLogger(__name__)

__all__ = [
    "Sense", "Verdict", "Objective", "SolveRequest", "SolveReport", "AtomCheck", "VerifyReport",
    "solve", "verify", "iter_feasible", "report_assignment", "instance_stats", "default_workers", "dumps",
]


class Sense(enum.Enum):
    MAX = "max"
    MIN = "min"


class Verdict(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT_EXACT_IMPLIED"
    BUDGET = "BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class Objective:
    poly: TmvPolynomial
    sense: Sense = Sense.MAX
    label: str = ""


@dataclass(frozen=True)
class SolveRequest:
    formula: object
    domain: Domain
    eps: float
    k: object
    objectives: tuple = ()
    workers: int | None = None
    budget: int | None = None
    chunk_size: int = 1 << 14
    notes: tuple = ()

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "notes", tuple(self.notes))
        self.domain.resolve_k(self.k)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ETR_APPROX_WORKERS", "1")))
    except ValueError:
        return 1


# -- verification ------------------------------------------------------------

@dataclass(frozen=True)
class AtomCheck:
    path: str
    label: str
    op: str
    value: float
    threshold: float
    relaxable: bool
    passed: bool


@dataclass(frozen=True)
class VerifyReport:
    atoms: tuple
    satisfied: bool
    eps: float
    guard: float


def _threshold(op: Op, eps, guard):
    if op in (Op.LE, Op.LT):
        return eps + (guard if op is Op.LE else 0)
    return -eps - (guard if op is Op.GE else 0)


def _passes(op, value, thr):
    return {Op.LE: value <= thr, Op.LT: value < thr, Op.GE: value >= thr, Op.GT: value > thr}[op]


def verify(assignment: Mapping, formula, eps, guard: float = 0.0, exact: bool = False) -> VerifyReport:
    """Re-check a candidate assignment atom by atom.

    ``assignment`` maps variable names to vectors (or :class:`GridPoint`).
    The overall verdict follows the And/Or structure of the normalized
    formula.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    values = {n: (realize(v, exact=exact) if isinstance(v, GridPoint) else v)
              for n, v in assignment.items()}
    for name, dim in formula_vars(formula).items():
        if name in values and len(values[name]) != dim:
            raise DimensionError(f"variable {name!r} has length {len(values[name])}, expected {dim}",
                                 variable=name, expected=dim, got=len(values[name]))
    norm = normalize(formula)
    checks = {}
    out = []
    for path, atom in atom_paths(norm):
        value = eval_tmv(atom.poly, values, exact=exact)
        e = eps if atom.relaxable else 0
        thr = _threshold(atom.op, e, guard)
        ok = bool(_passes(atom.op, value, thr))
        checks[id(atom)] = ok
        out.append(AtomCheck(path, atom.label, atom.op.value, float(value), float(thr), atom.relaxable, ok))

    def walk(node):
        if isinstance(node, Atom):
            return checks[id(node)]
        results = [walk(c) for c in node.children]
        return all(results) if isinstance(node, And) else any(results)

    return VerifyReport(tuple(out), walk(norm), float(eps), float(guard))


# -- instance statistics -------------------------------------------------------

def instance_stats(formula, domain: Domain, objectives=()) -> dict:
    """Parameters of the sample-size bound for this instance."""
    atoms = [a for _, a in atom_paths(formula)]
    polys = [a.poly for a in atoms] + [o.poly for o in objectives]
    stats = [poly_stats(p) for p in polys]
    return {
        "alpha": max((s.alpha for s in stats), default=0.0),
        "gamma": max(h.gamma for _, h in domain.variables),
        "n": len(domain.variables),
        "d": max((s.d for s in stats), default=1) or 1,
        "t": max((s.t for s in stats), default=1),
        "m": max(len(atoms), 1),
    }


# -- scanning ---------------------------------------------------------------------

_STATE = {}


def _init_worker(formula, domain, ks, eps, objectives, chunk):
    _STATE.update(formula=formula, domain=domain, ks=ks, eps=eps, objectives=objectives, chunk=chunk)


def _chunk_best(start, points, mask, objectives):
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        return None
    for obj in objectives:
        vals = eval_tmv_batch(obj.poly, {n: p[rows] for n, p in points.items()})
        if obj.sense is Sense.MIN:
            vals = -vals
        keep = vals == np.max(vals)
        rows = rows[keep]
    index = start + int(rows[0])
    sub = {n: p[rows[:1]] for n, p in points.items()}
    key = []
    for obj in objectives:
        v = float(eval_tmv_batch(obj.poly, sub)[0])
        key.append(-v if obj.sense is Sense.MIN else v)
    return tuple(key), index


def _better(a, b):
    """Is candidate ``a`` preferred over ``b``?  Both are ``(key, index)``."""
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    return a[1] < b[1]


def _scan(lo, hi, state=None):
    """Return ``("hit", index)`` or ``("best", (key, index) | None)`` for ``[lo, hi)``."""
    st = state or _STATE
    formula, domain, ks, eps = st["formula"], st["domain"], st["ks"], st["eps"]
    objectives = st["objectives"]
    best = None
    for start, _, points in domain.chunks(ks, lo, hi, st["chunk"]):
        mask = eval_batch(formula, points, eps)
        if not objectives:
            hits = np.flatnonzero(mask)
            if hits.size:
                return "hit", start + int(hits[0])
            continue
        cand = _chunk_best(start, points, mask, objectives)
        if cand is not None and _better(cand, best):
            best = cand
    return ("best", best) if objectives else ("hit", None)


def _ranges(lo, hi, pieces):
    step = max(1, -(-(hi - lo) // pieces))
    return [(a, min(hi, a + step)) for a in range(lo, hi, step)]


def _run(state, limit, workers):
    objectives = state["objectives"]
    if workers <= 1 or limit < 2 * state["chunk"]:
        return _scan(0, limit, state)
    ranges = _ranges(0, limit, workers * 8)
    init = (state["formula"], state["domain"], state["ks"], state["eps"], objectives, state["chunk"])
    best = None
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=init) as pool:
        futures = [pool.submit(_scan, a, b) for a, b in ranges]
        for fut in futures:
            kind, value = fut.result()
            if kind == "hit" and value is not None:
                for later in futures:
                    later.cancel()
                return kind, value
            if kind == "best" and value is not None and _better(value, best):
                best = value
    return ("best", best) if objectives else ("hit", None)


# -- reports ------------------------------------------------------------------------

@dataclass
class SolveReport:
    verdict: str
    points_scanned: int
    total_points: int
    k: dict
    eps: float
    assignment: dict | None = None
    index: int | None = None
    atoms: list = field(default_factory=list)
    objective_values: list = field(default_factory=list)
    guarantee_met: bool = False
    k_theory: int | None = None
    interpretation: str = ""
    diagnostics: list = field(default_factory=list)
    workers: int = 1
    wall_time: float = 0.0

    @property
    def sat(self) -> bool:
        return self.verdict == Verdict.SAT.value

    def point(self, name: str) -> np.ndarray:
        return np.asarray(self.assignment[name]["point"], dtype=float)

    def counts(self, name: str) -> tuple:
        return tuple(self.assignment[name]["counts"])

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SolveReport":
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - names
        if unknown:
            raise ValueError(f"unknown report fields {sorted(unknown)}")
        return cls(**obj)

    def comparable(self) -> dict:
        """JSON form without timing and worker fields."""
        out = self.to_json()
        out.pop("wall_time")
        out.pop("workers")
        return out


def _fmt(value):
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return "null"
        text = format(value, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(value, (int, str)):
        return json.dumps(value)
    if isinstance(value, (np.floating, np.integer)):
        return _fmt(value.item())
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _fmt(obj)


def _theory(formula, domain, objectives, ks, eps):
    if eps <= 0:
        return None, False
    s = instance_stats(formula, domain, objectives)
    try:
        kt = k_main(s["alpha"], s["gamma"], s["n"], s["d"], s["t"], s["m"], eps)
    except OverflowError:
        return None, False
    return kt, all(k >= kt for k in ks.values())


def solve(req: SolveRequest) -> SolveReport:
    started = time.perf_counter()
    diagnostics = list(req.notes)
    formula = normalize(req.formula, diagnostics)
    var_dims = formula_vars(formula)
    for obj in req.objectives:
        var_dims.update(obj.poly.var_dims())
    req.domain.check_vars(var_dims)
    ks = req.domain.resolve_k(req.k)
    total = req.domain.total(ks)
    limit = total if req.budget is None else min(total, int(req.budget))
    workers = req.workers if req.workers is not None else default_workers()
    state = dict(formula=formula, domain=req.domain, ks=ks, eps=float(req.eps),
                 objectives=req.objectives, chunk=int(req.chunk_size))
    logger.info("scanning %d of %d grid points with %d worker(s)", limit, total, workers)
    kind, value = _run(state, limit, workers)
    k_theory, met = _theory(formula, req.domain, req.objectives, ks, req.eps)

    report = SolveReport(verdict="", points_scanned=0, total_points=total, k=dict(ks),
                         eps=float(req.eps), guarantee_met=met, k_theory=k_theory,
                         diagnostics=diagnostics, workers=workers)
    index = None
    if kind == "hit" and value is not None:
        index = value
        report.points_scanned = index + 1
    elif kind == "best" and value is not None:
        index = value[1]
        report.points_scanned = limit
    else:
        report.points_scanned = limit

    complete = limit == total
    if index is not None and (complete or not req.objectives):
        report.verdict = Verdict.SAT.value
    elif not complete:
        report.verdict = Verdict.BUDGET.value
    else:
        report.verdict = Verdict.UNSAT.value

    if index is not None:
        gps = req.domain.point_at(ks, index)
        points = {n: realize(gp) for n, gp in gps.items()}
        report.assignment = {n: {"counts": list(gp.counts), "k": gp.k, "index": gp.index,
                                 "point": [float(v) for v in points[n]]}
                             for n, gp in gps.items()}
        report.index = index
        check = verify(points, formula, req.eps)
        if not check.satisfied:
            raise RuntimeError("returned grid point fails re-verification")
        report.atoms = [asdict(a) for a in check.atoms]
        report.objective_values = [eval_tmv(o.poly, points) for o in req.objectives]

    if report.verdict == Verdict.SAT.value:
        report.interpretation = "eps-relaxed formula holds at the returned grid point"
    elif report.verdict == Verdict.UNSAT.value:
        if met:
            report.interpretation = ("no grid point satisfies the eps-relaxed formula and k meets the "
                                     "theoretical bound, so the exact formula has no solution in the domain")
        else:
            report.interpretation = ("no grid point satisfies the eps-relaxed formula at the supplied k; "
                                     "k is below the theoretical bound, so exact infeasibility is not implied")
    else:
        report.interpretation = f"budget of {limit} points exhausted before the grid of {total} was covered"
    report.wall_time = time.perf_counter() - started
    return report


def report_assignment(report: SolveReport) -> dict:
    """``name -> realized vector`` from a SAT report."""
    return {n: np.asarray(v["point"]) for n, v in (report.assignment or {}).items()}


def iter_feasible(req: SolveRequest):
    """Yield ``(joint_index, {name: vector})`` for every feasible grid point."""
    formula = normalize(req.formula)
    ks = req.domain.resolve_k(req.k)
    total = req.domain.total(ks)
    limit = total if req.budget is None else min(total, int(req.budget))
    for start, _, points in req.domain.chunks(ks, 0, limit, req.chunk_size):
        mask = eval_batch(formula, points, float(req.eps))
        for r in np.flatnonzero(mask):
            yield start + int(r), {n: p[r] for n, p in points.items()}
