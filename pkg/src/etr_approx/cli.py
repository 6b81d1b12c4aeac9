"""Command-line front end.

Every subcommand prints one JSON document ``{"command", "verdict", "summary", "report"}``
and exits with 0 (solved), 3 (no grid solution), 4 (budget exhausted) or
2 (usage or input error).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .apps_games import (HalvingInstance, NormalFormGame, ShapleyGame, build_halving_request,
                         build_ne_request, build_shapley_request, evaluate_cut, profile_from_report,
                         regret, shapley_residuals, value_error_bound)
from .apps_geometry import (SegInstance, UdgInstance, build_seg_request, build_udg_request,
                            check_realization, graph_from_json)
from .apps_optimization import (EigenInstance, SqpInstance, build_constrained_opt,
                                build_eigen_request, eigen_residuals, solve_sqp)
from .bounds import (BoundInputs, k_main, k_multilinear, k_nontensor, k_sqp, k_standard_degree)
from .domain import domain_from_json, grid_size, hull_from_json
from .errors import BudgetError, EtrError, SchemaError
from .formula import formula_from_json
from .solver import (Objective, Sense, SolveReport, SolveRequest, Verdict, default_workers, dumps,
                     instance_stats, solve, verify)
from .tensor_poly import tensor_from_json, tmv_from_json

logger = logging.getLogger(__name__)

EXIT = {Verdict.SAT.value: 0, Verdict.UNSAT.value: 3, Verdict.BUDGET.value: 4, "OK": 0}
EXIT_USAGE = 2
# grid-size ceiling for --k auto when no --budget is given
AUTO_BUDGET = 10 ** 7


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    version: str = __version__
    verdict: str = ""
    wall_time: float = 0.0


class _Inputs:
    """Loads JSON inputs and records their digests."""

    def __init__(self):
        self.digests = {}

    def load(self, path: str, field_name: str):
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise SchemaError(f"cannot read {path}: {exc.strerror}", field_name) from None
        self.digests[field_name] = {"path": str(path), "sha256": hashlib.sha256(raw).hexdigest()}
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}", field_name) from None


def _parse_k(text: str):
    """``7``, ``3,4`` or ``auto``."""
    text = text.strip()
    if text == "auto":
        return "auto"
    try:
        if text.startswith("["):
            values = [int(v) for v in json.loads(text)]
        else:
            values = [int(v) for v in text.split(",")]
    except (ValueError, TypeError, json.JSONDecodeError):
        raise argparse.ArgumentTypeError(f"--k expects an integer, a comma list or 'auto', got {text!r}")
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("every k must be at least 1")
    return values[0] if len(values) == 1 else values


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _nonneg(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _auto_k(req_builder, eps, budget):
    """Theoretical k for the instance; refuses grids larger than ``budget``."""
    probe = req_builder(1)
    if eps <= 0:
        raise BudgetError("--k auto needs a positive eps")
    s = instance_stats(probe.formula, probe.domain, probe.objectives)
    k = k_main(s["alpha"], s["gamma"], s["n"], s["d"], s["t"], s["m"], eps)
    total = math.prod(grid_size(h.l, k) for _, h in probe.domain.variables)
    budget = AUTO_BUDGET if budget is None else budget
    if total > budget:
        raise BudgetError(f"theoretical k = {k} gives {total} grid points, above the budget of {budget}")
    return k


def _resolve(args, builder):
    k = args.k
    if k == "auto":
        k = _auto_k(builder, args.eps, args.budget)
    return builder(k)


def _finish(req: SolveRequest, args) -> SolveRequest:
    workers = args.workers if args.workers is not None else default_workers()
    return SolveRequest(req.formula, req.domain, req.eps, req.k, req.objectives, workers,
                        args.budget, req.chunk_size, req.notes)


def _matrix_from_json(obj, field_name):
    if isinstance(obj, dict):
        return tensor_from_json(obj, field_name).data
    arr = np.asarray(obj, dtype=float)
    return arr


# -- subcommands --------------------------------------------------------------------

def _cmd_solve(args, io):
    formula = formula_from_json(io.load(args.formula, "formula"))
    domain = domain_from_json(io.load(args.domain, "domain"))
    objectives = ()
    if args.objective:
        obj = io.load(args.objective, "objective")
        objectives = (Objective(tmv_from_json(obj, "objective"), Sense(args.sense)),)
    report = solve(_finish(_resolve(args, lambda k: SolveRequest(formula, domain, args.eps, k, objectives)),
                           args))
    return report, {}


def _cmd_bound(args, io):
    b = BoundInputs(args.alpha, args.gamma, args.n, args.d, args.t, args.m, args.eps, args.l)
    km = k_main(b.alpha, b.gamma, b.n, b.d, b.t, b.m, b.eps)
    summary = {
        "k_main": km,
        "k_multilinear": k_multilinear(b.alpha, b.gamma, b.n, b.m, b.eps),
        "k_standard_degree": k_standard_degree(b.alpha, b.gamma, b.d, b.eps),
        "k_nontensor": k_nontensor(b.alpha, b.gamma, b.d, b.t, b.l, b.eps),
        "k_sqp": k_sqp(b.eps),
        "grid_size_k_main": str(grid_size(b.l, km)),
    }
    if args.grid_k:
        summary["grid_size"] = {str(k): str(grid_size(b.l, k)) for k in args.grid_k}
    return None, summary


def _cmd_sqp(args, io):
    A = _matrix_from_json(io.load(args.matrix, "matrix"), "matrix")
    inst = SqpInstance(A, args.eps)
    k = k_sqp(args.eps) if args.k == "auto" else args.k
    if isinstance(k, list):
        raise SchemaError("sqp takes a single k", "k")
    if args.k == "auto" and grid_size(inst.p, k) > (args.budget or AUTO_BUDGET):
        raise BudgetError(f"k_sqp = {k} gives {grid_size(inst.p, k)} grid points, above the budget")
    workers = args.workers if args.workers is not None else default_workers()
    res = solve_sqp(inst, k, workers=workers)
    summary = {"value": res.value, "x": res.x.tolist(), "counts": list(res.point.counts), "k": res.k,
               "k_theory": res.k_theory, "guarantee_met": res.guarantee_met}
    return res.report, summary


def _cmd_opt(args, io):
    objective = tmv_from_json(io.load(args.objective, "objective"), "objective")
    cobj = io.load(args.constraints, "constraints") if args.constraints else []
    if isinstance(cobj, dict):
        cobj = cobj.get("constraints", [])
    constraints = [tmv_from_json(c, f"constraints[{i}]") for i, c in enumerate(cobj)]
    domain = domain_from_json(io.load(args.domain, "domain"))
    report = solve(_finish(_resolve(args, lambda k: build_constrained_opt(
        objective, constraints, domain, args.eps, k, Sense(args.sense))), args))
    return report, {"value": report.objective_values[0] if report.objective_values else None}


def _cmd_eigen(args, io):
    A = _matrix_from_json(io.load(args.tensor, "tensor"), "tensor")
    hull = hull_from_json(io.load(args.hull, "hull"))
    inst = EigenInstance(A, hull, args.lambda_max, args.eps, args.symmetric_lambda, args.delta)
    report = solve(_finish(_resolve(args, lambda k: build_eigen_request(inst, k)), args))
    summary = {}
    if report.sat:
        lam, x = report.point("lam"), report.point("x")
        summary = {"lambda": float(lam[0]), "x": x.tolist(),
                   "residuals": eigen_residuals(inst.A, x, lam).tolist()}
    return report, summary


def _cmd_nash(args, io):
    gobj = io.load(args.game, "game")
    try:
        game = NormalFormGame(tuple(gobj["payoffs"]))
    except KeyError:
        raise SchemaError("missing key", "game.payoffs") from None
    side = formula_from_json(io.load(args.constraints, "constraints")) if args.constraints else None
    report = solve(_finish(_resolve(args, lambda k: build_ne_request(game, args.eps, k, side)), args))
    summary = {}
    if report.sat:
        profile = profile_from_report(game, report)
        summary = {"profile": [p.tolist() for p in profile], "regret": regret(game, profile).tolist()}
    return report, summary


def _cmd_shapley(args, io):
    sobj = io.load(args.game, "game")
    try:
        bound = args.bound if args.bound is not None else float(sobj["B"])
        game = ShapleyGame(np.asarray(sobj["rewards"], dtype=float),
                           np.asarray(sobj["transitions"], dtype=float),
                           float(sobj["lambda"]), bound, int(sobj.get("start", 1)) - 1)
    except KeyError as exc:
        raise SchemaError("missing key", f"game.{exc.args[0]}") from None
    report = solve(_finish(_resolve(args, lambda k: build_shapley_request(game, args.eps, k)), args))
    summary = {}
    xs, ys, vs = game.names()
    if report.sat:
        v = np.array([report.point(n)[0] for n in vs])
        res = shapley_residuals(game, [report.point(n) for n in xs], [report.point(n) for n in ys], v)
        summary = {"values": v.tolist(), "start_value": float(v[game.start]),
                   "fixed_point_residual": float(np.max(res)),
                   "value_error_bound": value_error_bound(game, float(np.max(res)))}
    elif report.verdict == Verdict.UNSAT.value:
        summary = {"note": f"no grid solution with every value in [-{game.bound}, {game.bound}]"}
    return report, summary


def _cmd_halving(args, io):
    aobj = io.load(args.agents, "agents")
    agents = aobj.get("agents") if isinstance(aobj, dict) else aobj
    if agents is None:
        raise SchemaError("missing key", "agents.agents")
    inst = HalvingInstance(tuple(agents), int(aobj.get("max_degree", 8)) if isinstance(aobj, dict) else 8)
    report = solve(_finish(_resolve(args, lambda k: build_halving_request(inst, args.eps, k)), args))
    summary = {}
    if report.sat:
        t = report.point("t")
        summary = {"cuts": t.tolist(), "residuals": evaluate_cut(inst, t).tolist()}
    return report, summary


def _geom(args, io, kind):
    graph = graph_from_json(io.load(args.graph, "graph"))
    def builder(k):
        if kind == "seg":
            return build_seg_request(SegInstance(graph, args.K, args.eps), k)
        return build_udg_request(UdgInstance(graph, args.K, args.eps), k)

    report = solve(_finish(_resolve(args, builder), args))
    summary = {}
    if report.sat:
        check = check_realization(kind, report.point("z"), graph, args.eps)
        summary = {"realization_passed": check.passed, "pairs": [asdict(p) for p in check.pairs]}
    return report, summary


def _cmd_verify(args, io):
    formula = formula_from_json(io.load(args.formula, "formula"))
    assignment = io.load(args.assignment, "assignment")
    if not isinstance(assignment, dict):
        raise SchemaError("expected an object of name -> vector", "assignment")
    check = verify(assignment, formula, args.eps, args.guard)
    verdict = Verdict.SAT.value if check.satisfied else Verdict.UNSAT.value
    summary = {"satisfied": check.satisfied, "atoms": [asdict(a) for a in check.atoms]}
    return verdict, summary


# -- parser --------------------------------------------------------------------------

def _common(p, k_required=True, k_flag="--k"):
    p.add_argument("--eps", type=_nonneg, required=True)
    p.add_argument(k_flag, dest="k", type=_parse_k, required=k_required,
                   help="integer, comma list per variable, or 'auto'")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--budget", type=int, default=None, help="maximum grid points to scan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etr-approx", description="Grid search for eps-relaxed "
                                     "polynomial constraint systems over convex hulls.")
    parser.add_argument("--out", help="write the report here instead of stdout")
    parser.add_argument("--manifest", help="write a run manifest to this path")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a formula over a domain")
    p.add_argument("--formula", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--objective")
    p.add_argument("--sense", choices=["max", "min"], default="max")
    _common(p)

    p = sub.add_parser("bound", help="sample-size bounds")
    for name in ("alpha", "gamma"):
        p.add_argument(f"--{name}", type=_nonneg, required=True)
    for name in ("n", "d", "t", "m"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--l", type=int, default=1, help="hull vertex count for grid sizes")
    p.add_argument("--eps", type=_positive, required=True)
    p.add_argument("--grid-k", type=int, nargs="*", default=[])

    p = sub.add_parser("sqp", help="maximize x^T A x over the simplex")
    p.add_argument("--matrix", required=True)
    p.add_argument("--eps", type=_positive, required=True)
    p.add_argument("--k", type=_parse_k, default="auto")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)

    p = sub.add_parser("opt", help="optimize a polynomial under solution constraints")
    p.add_argument("--objective", required=True)
    p.add_argument("--constraints")
    p.add_argument("--domain", required=True)
    p.add_argument("--sense", choices=["max", "min"], default="max")
    _common(p)

    p = sub.add_parser("eigen", help="approximate tensor eigenpair")
    p.add_argument("--tensor", required=True)
    p.add_argument("--hull", required=True)
    p.add_argument("--lambda-max", type=_positive, required=True)
    p.add_argument("--symmetric-lambda", action="store_true")
    p.add_argument("--delta", type=_positive, default=0.5)
    _common(p)

    p = sub.add_parser("nash", help="constrained approximate Nash equilibrium")
    p.add_argument("--game", required=True)
    p.add_argument("--constraints")
    _common(p)

    p = sub.add_parser("shapley", help="Shapley game values")
    p.add_argument("--game", required=True)
    p.add_argument("--bound", type=_positive)
    _common(p)

    p = sub.add_parser("halving", help="consensus halving with polynomial valuations")
    p.add_argument("--agents", required=True)
    _common(p)

    for name in ("geom-seg", "geom-udg"):
        p = sub.add_parser(name, help=f"{name[5:]} graph recognition on a scaled simplex")
        p.add_argument("--graph", required=True)
        p.add_argument("--K", type=_positive, required=True)
        _common(p, k_flag="--grid-k")

    p = sub.add_parser("verify", help="check an assignment against a formula")
    p.add_argument("--formula", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--eps", type=_nonneg, required=True)
    p.add_argument("--guard", type=_nonneg, default=0.0)
    return parser


COMMANDS = {
    "solve": _cmd_solve, "bound": _cmd_bound, "sqp": _cmd_sqp, "opt": _cmd_opt,
    "eigen": _cmd_eigen, "nash": _cmd_nash, "shapley": _cmd_shapley, "halving": _cmd_halving,
    "geom-seg": lambda a, io: _geom(a, io, "seg"), "geom-udg": lambda a, io: _geom(a, io, "udg"),
    "verify": _cmd_verify,
}


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    io = _Inputs()
    started = time.perf_counter()
    try:
        result, summary = COMMANDS[args.command](args, io)
    except BudgetError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT[Verdict.BUDGET.value]
    except (EtrError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    if isinstance(result, SolveReport):
        verdict = result.verdict
        report = result.to_json()
    else:
        verdict = result if isinstance(result, str) else "OK"
        report = None
    doc = {"command": args.command, "verdict": verdict, "summary": summary, "report": report}
    text = dumps(doc) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)
    if args.manifest:
        params = {k: v for k, v in vars(args).items() if k not in ("out", "manifest", "verbose")}
        if params.get("workers") is None and "workers" in params:
            params["workers"] = default_workers()
        manifest = RunManifest(args.command, params, io.digests, verdict=verdict,
                               wall_time=time.perf_counter() - started)
        Path(args.manifest).write_text(dumps(asdict(manifest)) + "\n")
    return EXIT[verdict]


def main():
    sys.exit(run_cli())
