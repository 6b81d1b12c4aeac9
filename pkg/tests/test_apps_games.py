import itertools
import math

import numpy as np
import pytest

from etr_approx.apps_games import (HalvingInstance, NormalFormGame, ShapleyGame, build_halving_request,
                                   build_ne_request, build_shapley_request, evaluate_cut, halving_hull,
                                   halving_poly, payoff_poly, profile_from_report, regret,
                                   shapley_residuals, value_error_bound)
from etr_approx.errors import DimensionError
from etr_approx.formula import Atom, Op, count_atoms, normalize, tmv_from_monomials
from etr_approx.solver import solve, verify
from etr_approx.tensor_poly import eval_tmv

PENNIES = NormalFormGame((np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.0, 1.0], [1.0, 0.0]])))


def test_regret_examples():
    assert regret(PENNIES, [[0.5, 0.5], [0.5, 0.5]]).tolist() == [0.0, 0.0]
    assert regret(PENNIES, [[1, 0], [1, 0]]).tolist() == [0.0, 1.0]
    flat = NormalFormGame(tuple(np.full((3, 3, 3), 0.4) for _ in range(3)))
    rng = np.random.default_rng(0)
    assert regret(flat, [rng.dirichlet(np.ones(3)) for _ in range(3)]).tolist() == [0.0] * 3


def test_regret_matches_brute_force_on_random_games():
    rng = np.random.default_rng(1)
    for n, l in [(2, 3), (3, 2), (3, 3)]:
        game = NormalFormGame(tuple(rng.random((l,) * n) for _ in range(n)))
        prof = [rng.dirichlet(np.ones(l)) for _ in range(n)]
        for j in range(n):
            def u(override):
                total = 0.0
                for cell in itertools.product(range(l), repeat=n):
                    w = math.prod((1.0 if a == override else 0.0) if (i == j and override is not None)
                                  else prof[i][a] for i, a in enumerate(cell))
                    total += w * game.payoffs[j][cell]
                return total
            expected = max(u(a) for a in range(l)) - u(None)
            assert regret(game, prof)[j] == pytest.approx(expected, abs=1e-12)
            assert eval_tmv(payoff_poly(game, j), dict(zip(game.var_names, prof))) == pytest.approx(u(None))


def test_ne_structure_and_uniform_profile():
    req = build_ne_request(PENNIES, 0.0, 10)
    assert count_atoms(req.formula) == 4
    assert verify({"x1": [0.5, 0.5], "x2": [0.5, 0.5]}, req.formula, 0, guard=1e-9).satisfied
    r = solve(req)
    assert r.sat and [p.tolist() for p in profile_from_report(PENNIES, r)] == [[0.5, 0.5], [0.5, 0.5]]


def test_perturbed_profile_fails_a_tight_atom():
    req = build_ne_request(PENNIES, 0.1, 10)
    x1 = np.array([0.8, 0.5])
    x1 /= x1.sum()
    rep = verify({"x1": x1, "x2": [0.5, 0.5]}, req.formula, 0.1)
    assert not rep.satisfied


def test_side_constraint_makes_pennies_unsat():
    # player 1 payoff >= 0.9 cannot hold near equilibrium
    p1 = payoff_poly(PENNIES, 0) - 0.9
    req = build_ne_request(PENNIES, 0.05, 20, side_constraints=Atom(p1, Op.GE))
    assert solve(req).verdict == "UNSAT_EXACT_IMPLIED"
    bad = Atom(tmv_from_monomials([(1.0, [("z", 0)])], {"z": 2}), Op.GE)
    with pytest.raises(ValueError):
        build_ne_request(PENNIES, 0.05, 20, side_constraints=bad)


def test_game_validation():
    with pytest.raises(ValueError):
        NormalFormGame((np.array([[2.0, 0.0], [0.0, 1.0]]), np.zeros((2, 2))))
    with pytest.raises(DimensionError):
        NormalFormGame((np.zeros((2, 3)), np.zeros((2, 3))))
    with pytest.raises(DimensionError):
        regret(PENNIES, [[1, 0]])


# -- Shapley ------------------------------------------------------------------------------

def one_state(r):
    return ShapleyGame(np.array(r, dtype=float)[None], np.ones((1, 1) + np.shape(r)), 0.5, 4.0)


def test_shapley_structure():
    g = one_state([[1.0, -1.0], [-1.0, 1.0]])
    req = build_shapley_request(g, 0.01, 4)
    # 2MN best-response atoms plus one value equation per state
    assert count_atoms(req.formula) == 2 * 2 * 1 + 1
    assert req.domain.names == ("x1", "y1", "v1")
    assert g.c == 1.0


def test_shapley_fixed_points_verify():
    one = one_state([[1.0]])
    req = build_shapley_request(one, 0.0, 4)
    assert verify({"x1": [1.0], "y1": [1.0], "v1": [2.0]}, req.formula, 0).satisfied
    assert not verify({"x1": [1.0], "y1": [1.0], "v1": [1.0]}, req.formula, 0.1).satisfied
    pennies = one_state([[1.0, -1.0], [-1.0, 1.0]])
    req = build_shapley_request(pennies, 0.0, 4)
    assert verify({"x1": [0.5, 0.5], "y1": [0.5, 0.5], "v1": [0.0]}, req.formula, 0).satisfied
    assert shapley_residuals(pennies, [[0.5, 0.5]], [[0.5, 0.5]], [0.0]).tolist() == [0.0]


def test_zero_rewards_value_zero():
    g = ShapleyGame(np.zeros((2, 2, 2)), np.full((2, 2, 2, 2), 0.5), 0.5, 1.0)
    r = solve(build_shapley_request(g, 0.01, 2))
    assert r.sat and r.point("v1")[0] == 0.0 and r.point("v2")[0] == 0.0


def test_two_state_solution_matches_value_iteration():
    rng = np.random.default_rng(4)
    N, M = 2, 2
    rewards = rng.uniform(-1, 1, (N, M, M)).round(1)
    trans = rng.dirichlet(np.ones(N), size=(N, M, M)).transpose(0, 3, 1, 2)
    g = ShapleyGame(rewards, trans, 0.5, 2.0)
    eps = 0.1
    r = solve(build_shapley_request(g, eps, {"x1": 4, "x2": 4, "y1": 4, "y2": 4, "v1": 20, "v2": 20}))
    assert r.sat
    # independent reference: value iteration with each matrix game solved over a fine mixed grid
    v = np.zeros(N)
    grid = np.linspace(0, 1, 401)
    for _ in range(60):
        new = np.empty(N)
        for s in range(N):
            G = rewards[s] + 0.5 * np.tensordot(v, trans[s], axes=([0], [0]))
            xs = np.stack([grid, 1 - grid], axis=1)
            new[s] = np.min(np.max(xs @ G, axis=1))
        v = new
    x = [r.point(f"x{s + 1}") for s in range(N)]
    y = [r.point(f"y{s + 1}") for s in range(N)]
    vs = np.array([r.point(f"v{s + 1}")[0] for s in range(N)])
    res = shapley_residuals(g, x, y, vs)
    assert np.max(np.abs(vs - v)) <= value_error_bound(g, float(np.max(res))) + 1e-3
    assert value_error_bound(g, 0.1) == pytest.approx(0.2)


def test_shapley_validation():
    with pytest.raises(ValueError):
        ShapleyGame(np.zeros((1, 1, 1)), np.full((1, 1, 1, 1), 0.5), 0.5, 1.0)
    with pytest.raises(ValueError):
        ShapleyGame(np.zeros((1, 1, 1)), np.ones((1, 1, 1, 1)), 1.0, 1.0)
    with pytest.raises(DimensionError):
        ShapleyGame(np.zeros((1, 2, 2)), np.ones((1, 1, 1, 1)), 0.5, 1.0)


# -- consensus halving -------------------------------------------------------------------

def test_halving_hull_vertices():
    assert halving_hull(2).vertices.tolist() == [[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]


@pytest.mark.parametrize("coeffs", [((0, 0, 1),), ((0, 1), (0, 0, 0, 1)), ((1,), (0.5, 0.2, 0.3)),
                                    ((0, 0.3, 0.7), (0, 1), (0.2, 0, 0, 0.8))])
def test_tensor_path_matches_interval_sums(coeffs):
    inst = HalvingInstance(coeffs)
    rng = np.random.default_rng(len(coeffs))
    for _ in range(20):
        t = np.sort(rng.random(inst.n))
        direct = evaluate_cut(inst, t)
        for i in range(inst.n):
            assert abs(eval_tmv(halving_poly(inst, i), {"t": t})) == pytest.approx(direct[i], abs=1e-12)


def test_halving_square_valuation():
    inst = HalvingInstance(((0, 0, 1),))
    r = solve(build_halving_request(inst, 0.02, 100))
    t = r.point("t")[0]
    assert abs(1 - 2 * t * t) <= 0.02
    assert evaluate_cut(inst, [1 / math.sqrt(2)])[0] == pytest.approx(0, abs=1e-12)


def test_halving_two_linear_agents():
    inst = HalvingInstance(((0, 1), (0, 1)))
    r = solve(build_halving_request(inst, 0.01, 4))
    assert r.sat and np.all(evaluate_cut(inst, r.point("t")) <= 0.01)


def test_constant_valuation_is_always_balanced():
    inst = HalvingInstance(((3.0,),))
    assert evaluate_cut(inst, [0.3])[0] == 0.0
    assert eval_tmv(halving_poly(inst, 0), {"t": [0.3]}) == 0.0


def test_halving_validation():
    with pytest.raises(ValueError):
        HalvingInstance(((0,) * 10,))
    with pytest.raises(ValueError):
        evaluate_cut(HalvingInstance(((0, 1), (0, 1))), [0.6, 0.4])
    with pytest.raises(DimensionError):
        evaluate_cut(HalvingInstance(((0, 1),)), [0.2, 0.4])
    req = build_halving_request(HalvingInstance(((0, 1),)), 0.1, 3)
    assert len(normalize(req.formula).children) == 1
