"""Acceptance suite: thirteen numbered criteria, one PASS/FAIL line each.

Run under pytest (the lines are repeated in the terminal summary) or
directly with ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import math
import sys
import time
from fractions import Fraction

import numpy as np

from etr_approx.apps_games import (HalvingInstance, NormalFormGame, ShapleyGame, build_halving_request,
                                   build_ne_request, build_shapley_request, evaluate_cut, halving_poly)
from etr_approx.apps_geometry import Graph, UdgInstance, build_udg_request, check_realization
from etr_approx.apps_optimization import (EigenInstance, SqpInstance, adjacency_matrix, build_eigen_request,
                                          eigen_residuals, solve_sqp, sqp_oracle)
from etr_approx.bounds import eps_for_k_sqp, k_main, k_multilinear, k_sqp, k_standard_degree, perturbation_bound
from etr_approx.domain import enumerate_k_uniform, simplex_hull
from etr_approx.formula import (And, Atom, Not, Op, Or, build_feas_gadget, count_atoms, eval_exact,
                                eval_relaxed, feas_witness, tmv_from_monomials)
from etr_approx.solver import iter_feasible, solve, verify
from etr_approx.tensor_poly import eval_tmv

RESULTS: dict[int, str] = {}


def _record(number, title, passed, detail):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
    if detail:
        line += f"  [{detail}]"
    RESULTS[number] = line
    print(line)


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run():
            try:
                detail = fn()
            except BaseException as exc:
                _record(number, title, False, f"{type(exc).__name__}: {exc}".splitlines()[0][:200])
                raise
            _record(number, title, True, detail)
        return run
    return wrap


def clique_matrix(c):
    return adjacency_matrix(c, itertools.combinations(range(c), 2))


MATCHING_PENNIES = NormalFormGame((np.array([[1.0, 0.0], [0.0, 1.0]]),
                                   np.array([[0.0, 1.0], [1.0, 0.0]])))
HALVING = HalvingInstance(((0.0, 0.0, 1.0),))


def random_games(seed=6):
    rng = np.random.default_rng(seed)
    two = [NormalFormGame(tuple(rng.random((2, 2)) for _ in range(2))) for _ in range(10)]
    three = [NormalFormGame(tuple(rng.random((2, 2, 2)) for _ in range(3))) for _ in range(10)]
    return two, three


def brute_regret(game, profile):
    """Max pure-deviation gain, summing the payoff table cell by cell."""
    n, l = game.n, game.l
    worst = 0.0
    for j in range(n):
        def expected(override):
            total = 0.0
            for cell in itertools.product(range(l), repeat=n):
                w = 1.0
                for i, a in enumerate(cell):
                    if i == j and override is not None:
                        w *= 1.0 if a == override else 0.0
                    else:
                        w *= profile[i][a]
                total += w * game.payoffs[j][cell]
            return total
        realized = expected(None)
        worst = max(worst, max(expected(a) for a in range(l)) - realized)
    return worst


# -- 1 -----------------------------------------------------------------------------

@criterion(1, "Motzkin-Straus: solve_sqp on K2..K5 at k=200 within 0.02 of 1-1/c, under 30 s")
def test_criterion_01_motzkin_straus():
    start = time.perf_counter()
    found = []
    for c in range(2, 6):
        res = solve_sqp(SqpInstance(clique_matrix(c), eps=0.1), k=200)
        target = 1 - 1 / c
        assert abs(res.value - target) <= 0.02, f"K{c}: value {res.value} vs {target}"
        found.append(f"K{c}={res.value:.4f}")
    elapsed = time.perf_counter() - start
    assert elapsed < 30, f"took {elapsed:.1f} s"
    return f"{', '.join(found)}; {elapsed:.1f} s"


# -- 2 -----------------------------------------------------------------------------

@criterion(2, "SQP grid vs fine-grid oracle on 20 random 3x3 matrices, monotone refinement")
def test_criterion_02_sqp_oracle_gap():
    rng = np.random.default_rng(2)
    worst_gap = 0.0
    for trial in range(20):
        A = rng.random((3, 3))
        oracle = sqp_oracle(A, 600).value
        grid = solve_sqp(SqpInstance(A, eps=0.05), k=60).value
        worst_gap = max(worst_gap, abs(grid - oracle))
        assert abs(grid - oracle) <= 0.05, f"matrix {trial}: |{grid} - {oracle}| > 0.05"
        values = [solve_sqp(SqpInstance(A, eps=0.05), k=k).value for k in (10, 20, 40, 80)]
        assert all(a <= b for a, b in zip(values, values[1:])), f"matrix {trial}: not monotone {values}"
        for k, v in zip((10, 20, 40, 80), values):
            eps_k = eps_for_k_sqp(k)
            assert k >= k_sqp(eps_k)
            assert oracle - v < eps_k, f"matrix {trial}, k={k}: gap {oracle - v} >= {eps_k}"
    return f"max |grid - oracle| = {worst_gap:.4f}"


# -- 3 -----------------------------------------------------------------------------

@criterion(3, "bound calculators: 355, 459, 3, 32")
def test_criterion_03_bounds():
    got = (k_main(1, 1, 1, 1, 1, 1, 1), k_sqp(0.5), k_multilinear(1, 1, 1, 1, 1), k_standard_degree(1, 1, 1, 1))
    assert got == (355, 459, 3, 32), got
    return f"got {got}"


# -- 4 -----------------------------------------------------------------------------

def _random_poly(rng, q, d):
    """Random expanded polynomial as ``{exponent tuple: coefficient}``, degree exactly ``d``."""
    terms = {}
    top = [0] * q
    for _ in range(d):
        top[int(rng.integers(q))] += 1
    terms[tuple(top)] = Fraction(int(rng.integers(1, 17)) * int(rng.choice([-1, 1])), 8)
    for _ in range(int(rng.integers(0, 7))):
        deg = int(rng.integers(0, d + 1))
        e = [0] * q
        for _ in range(deg):
            e[int(rng.integers(q))] += 1
        c = Fraction(int(rng.integers(-16, 17)), 8)
        if c:
            terms[tuple(e)] = terms.get(tuple(e), 0) + c
    return {e: c for e, c in terms.items() if c}


def _direct(terms, x):
    return sum(c * math.prod(xi ** ei for xi, ei in zip(x, e)) for e, c in terms.items())


@criterion(4, "perturbation bound holds on 500 random polynomials, zero violations")
def test_criterion_04_perturbation():
    rng = np.random.default_rng(4)
    violations = 0
    worst = 0.0
    for _ in range(500):
        q, d = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        terms = _random_poly(rng, q, d)
        d_actual = max(sum(e) for e in terms)
        eps = Fraction(int(rng.integers(1, 1025)), 1024)
        x = [Fraction(int(rng.integers(0, 1025)), 1024) for _ in range(q)]
        xp = []
        for xi in x:
            step = Fraction(int(rng.integers(-1024, 1025)), 1024) * eps
            xp.append(min(Fraction(1), max(Fraction(0), xi + step)))
        assert max(abs(a - b) for a, b in zip(x, xp)) <= eps
        const = terms.get((0,) * q, 0)
        monos = [(float(c), [("x", i) for i, ei in enumerate(e) for _ in range(ei)])
                 for e, c in terms.items() if any(e)]
        poly = tmv_from_monomials(monos, {"x": q}, float(const))
        px, pxp = eval_tmv(poly, {"x": x}, exact=True), eval_tmv(poly, {"x": xp}, exact=True)
        assert px == _direct(terms, x) and pxp == _direct(terms, xp)
        bound = perturbation_bound(max(abs(c) for c in terms.values()), len(terms), d_actual, 1, eps)
        diff = abs(px - pxp)
        if bound:
            worst = max(worst, float(diff) / bound)
        violations += diff > Fraction(bound)
    assert violations == 0, f"{violations} violations"
    return f"0 violations, max |dp|/bound = {worst:.3f}"


# -- 5 -----------------------------------------------------------------------------

def _reference_multisets(l, k):
    """Recursive generator of size-``k`` multisets over ``0..l-1`` (non-decreasing tuples)."""
    def rec(lowest, remaining):
        if remaining == 0:
            yield ()
            return
        for item in range(lowest, l):
            for rest in rec(item, remaining - 1):
                yield (item,) + rest
    return list(rec(0, k))


@criterion(5, "k-uniform enumeration matches a recursive reference for l, k <= 6")
def test_criterion_05_enumeration():
    cases = 0
    for l in range(1, 7):
        hull = simplex_hull(l)
        for k in range(1, 7):
            pts = list(enumerate_k_uniform(hull, k))
            multisets = [tuple(i for i, c in enumerate(p.counts) for _ in range(c)) for p in pts]
            assert len(pts) == math.comb(l + k - 1, k)
            assert len(set(multisets)) == len(multisets)
            assert sorted(multisets) == sorted(_reference_multisets(l, k))
            for chunk in (1, 3, 7):
                assert list(enumerate_k_uniform(hull, k, chunk=chunk)) == pts
            cut = len(pts) // 3
            pieces = (list(enumerate_k_uniform(hull, k, 0, cut))
                      + list(enumerate_k_uniform(hull, k, cut, 2 * cut))
                      + list(enumerate_k_uniform(hull, k, 2 * cut)))
            assert pieces == pts
            cases += 1
    return f"{cases} (l, k) pairs"


# -- 6 -----------------------------------------------------------------------------

@criterion(6, "Nash: every SAT profile at eps=0.1, k=50 has regret <= 0.1; uniform pennies verifies at eps=0")
def test_criterion_06_nash():
    two, three = random_games()
    games = [MATCHING_PENNIES] + two + three
    checked = sat = 0
    worst = 0.0
    for game in games:
        req = build_ne_request(game, 0.1, 50)
        report = solve(req)
        if report.sat:
            sat += 1
            assert brute_regret(game, [report.point(n) for n in game.var_names]) <= 0.1
        for _, point in iter_feasible(req):
            r = brute_regret(game, [point[n] for n in game.var_names])
            worst = max(worst, r)
            checked += 1
            assert r <= 0.1, f"regret {r} at {point}"
    uniform = {"x1": [0.5, 0.5], "x2": [0.5, 0.5]}
    assert verify(uniform, build_ne_request(MATCHING_PENNIES, 0, 50).formula, 0).satisfied
    return f"{sat}/{len(games)} games SAT, {checked} feasible profiles, max regret {worst:.4f}"


# -- 7 -----------------------------------------------------------------------------

@criterion(7, "Shapley: r=1 self-loop gives v within 0.05 of 2; matching-pennies state |v| <= 0.05")
def test_criterion_07_shapley():
    one = ShapleyGame(np.ones((1, 1, 1)), np.ones((1, 1, 1, 1)), 0.5, 4.0)
    r1 = solve(build_shapley_request(one, 0.02, 100))
    assert r1.sat and abs(r1.point("v1")[0] - 2) <= 0.05, r1.verdict
    pennies = ShapleyGame(np.array([[[1.0, -1.0], [-1.0, 1.0]]]), np.ones((1, 1, 2, 2)), 0.5, 4.0)
    r2 = solve(build_shapley_request(pennies, 0.01, 100))
    assert r2.sat and abs(r2.point("v1")[0]) <= 0.05, r2.verdict
    return f"v = {r1.point('v1')[0]:g} and {r2.point('v1')[0]:g}"


# -- 8 -----------------------------------------------------------------------------

@criterion(8, "consensus halving F=t^2: |1 - 2 t^2| <= 0.02, residual paths agree to 1e-9")
def test_criterion_08_halving():
    report = solve(build_halving_request(HALVING, 0.02, 100))
    assert report.sat, report.verdict
    t = report.point("t")
    assert abs(1 - 2 * t[0] ** 2) <= 0.02
    tensor = abs(eval_tmv(halving_poly(HALVING, 0), {"t": t}))
    direct = evaluate_cut(HALVING, t)[0]
    assert abs(tensor - direct) <= 1e-9
    return f"t1 = {t[0]:g}, residual {direct:.4f}"


# -- 9 -----------------------------------------------------------------------------

@criterion(9, "eigen: diagonal tensor gives (1, e1) within 0.05; zero tensor gives lambda = 0")
def test_criterion_09_eigen():
    diag = np.zeros((3, 3, 3))
    for i in range(3):
        diag[i, i, i] = 1.0
    ks = {"lam": 40, "x": 10}
    r = solve(build_eigen_request(EigenInstance(diag, simplex_hull(3), 2.0, 0.05), ks))
    assert r.sat, r.verdict
    lam, x = r.point("lam")[0], r.point("x")
    assert np.allclose(x, [1, 0, 0]) and abs(lam - 1) <= 0.05
    assert np.all(eigen_residuals(diag, x, lam) <= 0.05)
    z = solve(build_eigen_request(EigenInstance(np.zeros((3, 3, 3)), simplex_hull(3), 2.0, 0.05), ks))
    assert z.sat and z.point("lam")[0] == 0.0, z.verdict
    return f"lambda = {lam:g}, x = {x.tolist()}"


# -- 10 ----------------------------------------------------------------------------

@criterion(10, "unit disk: K2 at K=2 SAT with checked edge; triangle + isolated vertex at K=0.1 UNSAT")
def test_criterion_10_geometry():
    k2 = Graph(2, frozenset({(0, 1)}))
    r = solve(build_udg_request(UdgInstance(k2, 2.0, 0.1), 10))
    assert r.sat, r.verdict
    check = check_realization("udg", r.point("z"), k2, 0.1)
    assert check.passed and check.pairs[0].edge and check.pairs[0].passed
    tri = Graph(4, frozenset({(0, 1), (0, 2), (1, 2)}))
    u = solve(build_udg_request(UdgInstance(tri, 0.1, 0.1), 10))
    assert u.verdict == "UNSAT_EXACT_IMPLIED", u.verdict
    return f"K2 d^2 = {check.pairs[0].value:g}; triangle scanned {u.points_scanned} points"


# -- 11 ----------------------------------------------------------------------------

@criterion(11, "FEAS gadget L=0, eps=1: 7 atoms, witness holds, halved t fails")
def test_criterion_11_feas():
    gadget = build_feas_gadget(0, 1, exact=True)
    witness = feas_witness(0, 1, exact=True)
    assert count_atoms(gadget.formula) == 7
    assert eval_relaxed(gadget.formula, witness, 1, exact=True)
    halved = dict(witness)
    halved["t"] = [v / 2 for v in witness["t"]]
    assert not eval_relaxed(gadget.formula, halved, 1, exact=True)
    return f"threshold {gadget.threshold}"


# -- 12 ----------------------------------------------------------------------------

@criterion(12, "determinism: identical verdict and witness for 1, 4 and 8 workers")
def test_criterion_12_determinism():
    outcomes = {}
    for w in (1, 4, 8):
        runs = []
        for c in range(2, 6):
            res = solve_sqp(SqpInstance(clique_matrix(c), eps=0.1), k=200, workers=w)
            runs.append(res.report.comparable())
        two, three = random_games()
        for game in (MATCHING_PENNIES, two[0], three[0]):
            req = dataclasses.replace(build_ne_request(game, 0.1, 50), workers=w, chunk_size=256)
            runs.append(solve(req).comparable())
        req = dataclasses.replace(build_halving_request(HALVING, 0.02, 100), workers=w, chunk_size=8)
        runs.append(solve(req).comparable())
        outcomes[w] = runs
    assert outcomes[1] == outcomes[4] == outcomes[8]
    return f"{len(outcomes[1])} instances x 3 worker counts"


# -- 13 ----------------------------------------------------------------------------

_OPS = (Op.LT, Op.LE, Op.GE, Op.GT, Op.EQ)
_DIMS = {"x": 2, "y": 3}


def _random_atom(rng):
    monos = []
    for _ in range(int(rng.integers(1, 4))):
        factors = []
        for _ in range(int(rng.integers(1, 3))):
            name = str(rng.choice(list(_DIMS)))
            factors.append((name, int(rng.integers(_DIMS[name]))))
        monos.append((float(rng.uniform(-1, 1)), factors))
    poly = tmv_from_monomials(monos, _DIMS, float(rng.uniform(-0.5, 0.5)), tuple(_DIMS))
    return Atom(poly, _OPS[int(rng.integers(len(_OPS)))], relaxable=bool(rng.random() < 0.8))


def _random_formula(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return _random_atom(rng)
    kind = int(rng.integers(3))
    if kind == 2:
        return Not(_random_formula(rng, depth - 1))
    children = tuple(_random_formula(rng, depth - 1) for _ in range(int(rng.integers(1, 4))))
    return And(children) if kind == 0 else Or(children)


@criterion(13, "eps-monotonicity and exact => relaxed on 1000 random triples")
def test_criterion_13_monotonicity():
    rng = np.random.default_rng(13)
    violations = 0
    exact_true = 0
    for _ in range(1000):
        f = _random_formula(rng, 3)
        a = {n: rng.uniform(-1, 1, d) for n, d in _DIMS.items()}
        e1 = float(rng.uniform(0, 0.5))
        e2 = e1 + float(rng.uniform(0, 0.5))
        r1, r2 = eval_relaxed(f, a, e1), eval_relaxed(f, a, e2)
        ex = eval_exact(f, a)
        exact_true += ex
        violations += (r1 and not r2) + (ex and not r1)
    assert violations == 0, f"{violations} violations"
    return f"0 violations, exact true in {exact_true}/1000"


ALL = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]


if __name__ == "__main__":
    failed = 0
    for test in ALL:
        try:
            test()
        except Exception:
            failed += 1
    print(f"{len(ALL) - failed}/{len(ALL)} criteria passed")
    sys.exit(1 if failed else 0)
