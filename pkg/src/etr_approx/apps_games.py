"""Game-theoretic front ends: constrained approximate Nash equilibria,
Shapley game values, and consensus halving with polynomial valuations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Domain, ConvexHull, interval_hull, simplex_hull
from .errors import DimensionError
from .formula import And, Atom, Op, formula_vars
from .solver import SolveRequest
from .tensor_poly import DenseTensor, StmPolynomial, TmvPolynomial

__all__ = [
    "NormalFormGame", "payoff_poly", "regret", "build_ne_request", "profile_from_report",
    "ShapleyGame", "build_shapley_request", "shapley_residuals", "value_error_bound",
    "HalvingInstance", "halving_hull", "halving_poly", "build_halving_request", "evaluate_cut",
]


# -- normal form games ---------------------------------------------------------------

@dataclass(frozen=True)
class NormalFormGame:
    """``payoffs[j]`` is player j's tensor, one axis per player, entries in [0, 1]."""

    payoffs: tuple

    def __post_init__(self):
        arrs = tuple(np.array(a, dtype=float) for a in self.payoffs)
        if not arrs:
            raise ValueError("a game needs at least one player")
        n = len(arrs)
        shape = arrs[0].shape
        if len(shape) != n or len(set(shape)) != 1:
            raise DimensionError(f"payoff tensors must have {n} axes of equal length, got {shape}")
        for j, a in enumerate(arrs):
            if a.shape != shape:
                raise DimensionError(f"payoff tensor of player {j + 1} has shape {a.shape}")
            if np.any(a < 0) or np.any(a > 1):
                raise ValueError(f"payoffs of player {j + 1} must lie in [0, 1]")
            a.setflags(write=False)
        object.__setattr__(self, "payoffs", arrs)

    @property
    def n(self) -> int:
        return len(self.payoffs)

    @property
    def l(self) -> int:
        return self.payoffs[0].shape[0]

    @property
    def var_names(self) -> tuple:
        return tuple(f"x{j + 1}" for j in range(self.n))


def payoff_poly(game: NormalFormGame, j: int) -> TmvPolynomial:
    """Expected payoff of player ``j`` (0-based) as a multilinear polynomial."""
    return TmvPolynomial((StmPolynomial(DenseTensor(game.payoffs[j]), (1,) * game.n, 0.0,
                                        game.var_names),))


def _deviation_poly(game: NormalFormGame, j: int, action: int) -> TmvPolynomial:
    """``u_j(action, x_-j) - u_j(x)``."""
    A = game.payoffs[j]
    names = game.var_names
    exps = tuple(0 if i == j else 1 for i in range(game.n))
    pure = StmPolynomial(DenseTensor(np.take(A, action, axis=j)), exps, 0.0, names)
    mixed = StmPolynomial(DenseTensor(-A), (1,) * game.n, 0.0, names)
    return TmvPolynomial((pure, mixed))


def regret(game: NormalFormGame, profile) -> np.ndarray:
    """Best pure deviation gain of each player, by direct contraction."""
    xs = [np.asarray(x, dtype=float) for x in profile]
    if len(xs) != game.n or any(x.shape != (game.l,) for x in xs):
        raise DimensionError(f"profile must hold {game.n} vectors of length {game.l}")
    out = np.empty(game.n)
    for j, A in enumerate(game.payoffs):
        # contract every axis except j, leaving payoffs of j's pure actions
        pure = A
        for axis in reversed(range(game.n)):
            if axis != j:
                pure = np.tensordot(pure, xs[axis], axes=([axis], [0]))
        out[j] = float(np.max(pure) - pure @ xs[j])
    return out


def build_ne_request(game: NormalFormGame, eps, k, side_constraints=None,
                     workers: int | None = None) -> SolveRequest:
    """Best-response atoms ``u_j(a, x_-j) - u_j(x) <= 0`` for every player and action.

    ``side_constraints`` is any formula over the strategy variables
    ``x1..xn``; it is conjoined with the equilibrium atoms.
    """
    atoms = [Atom(_deviation_poly(game, j, a), Op.LE, label=f"br{j + 1}.{a + 1}")
             for j in range(game.n) for a in range(game.l)]
    children = tuple(atoms)
    if side_constraints is not None:
        for name, dim in formula_vars(side_constraints).items():
            if name not in game.var_names or dim != game.l:
                raise ValueError(f"side constraint uses unknown variable {name!r} (dim {dim})")
        children += (side_constraints,)
    domain = Domain(tuple((name, simplex_hull(game.l)) for name in game.var_names))
    return SolveRequest(And(children), domain, eps, k, workers=workers)


def profile_from_report(game: NormalFormGame, report) -> list:
    return [report.point(name) for name in game.var_names]


# -- Shapley games ----------------------------------------------------------------------

@dataclass(frozen=True)
class ShapleyGame:
    """``rewards[s, j, k]`` and ``transitions[s, s2, j, k]``; player one minimizes."""

    rewards: np.ndarray
    transitions: np.ndarray
    discount: float
    bound: float
    start: int = 0

    def __post_init__(self):
        r = np.array(self.rewards, dtype=float)
        p = np.array(self.transitions, dtype=float)
        if r.ndim != 3 or r.shape[1] != r.shape[2]:
            raise DimensionError(f"rewards must have shape (N, M, M), got {r.shape}")
        N, M = r.shape[0], r.shape[1]
        if p.shape != (N, N, M, M):
            raise DimensionError(f"transitions must have shape {(N, N, M, M)}, got {p.shape}")
        if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError("transition probabilities must be non-negative and sum to 1")
        if not 0 < self.discount < 1:
            raise ValueError("discount must lie in (0, 1)")
        if not self.bound > 0:
            raise ValueError("value bound must be positive")
        if not 0 <= self.start < N:
            raise ValueError("start state out of range")
        r.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "transitions", p)

    @property
    def N(self) -> int:
        return self.rewards.shape[0]

    @property
    def M(self) -> int:
        return self.rewards.shape[1]

    @property
    def c(self) -> float:
        return float(np.max(np.abs(self.rewards))) if self.rewards.size else 0.0

    def names(self):
        xs = tuple(f"x{s + 1}" for s in range(self.N))
        ys = tuple(f"y{s + 1}" for s in range(self.N))
        vs = tuple(f"v{s + 1}" for s in range(self.N))
        return xs, ys, vs


def _stage_poly(game: ShapleyGame, s: int, x_action=None, y_action=None) -> TmvPolynomial:
    """``r(s, x, y) + discount * sum_s2 p(s, s2, x, y) v(s2)`` with optional pure actions."""
    xs, ys, vs = game.names()
    names = (xs[s], ys[s]) + vs

    def restrict(arr):
        # arr has leading axes (j, k); fixing a pure action drops that axis
        if x_action is not None:
            arr = arr[x_action]
            if y_action is not None:
                arr = arr[y_action]
        elif y_action is not None:
            arr = arr[:, y_action]
        return arr

    ex = 0 if x_action is not None else 1
    ey = 0 if y_action is not None else 1
    terms = [StmPolynomial(DenseTensor(restrict(game.rewards[s])), (ex, ey) + (0,) * game.N, 0.0, names)]
    for s2 in range(game.N):
        coef = restrict(game.discount * game.transitions[s, s2])[..., None]
        exps = (ex, ey) + tuple(1 if t == s2 else 0 for t in range(game.N))
        terms.append(StmPolynomial(DenseTensor(coef), exps, 0.0, names))
    return TmvPolynomial(tuple(terms))


def build_shapley_request(game: ShapleyGame, eps, k, workers: int | None = None) -> SolveRequest:
    """Per-state optimality conditions at value ``v``.

    For each state ``s`` with stage payoff ``G_s(x, y, v)``:
    ``G_s(x, y, v) - G_s(j, y, v) <= 0`` for every action ``j`` of the
    minimizer, ``G_s(x, k, v) - G_s(x, y, v) <= 0`` for every action ``k``
    of the maximizer, and ``v_s = G_s(x, y, v)``.  Each ``v_s`` ranges over
    ``[-bound, bound]``.
    """
    xs, ys, vs = game.names()
    atoms = []
    for s in range(game.N):
        stage = _stage_poly(game, s)
        for j in range(game.M):
            atoms.append(Atom(stage - _stage_poly(game, s, x_action=j), Op.LE, label=f"s{s + 1}.x{j + 1}"))
        for a in range(game.M):
            atoms.append(Atom(_stage_poly(game, s, y_action=a) - stage, Op.LE, label=f"s{s + 1}.y{a + 1}"))
        value = TmvPolynomial((StmPolynomial(DenseTensor(np.ones(1)), (1,), 0.0, (vs[s],)),))
        atoms.append(Atom(value - stage, Op.EQ, label=f"s{s + 1}.value"))
    hull = simplex_hull(game.M)
    vhull = interval_hull(-game.bound, game.bound)
    domain = Domain(tuple((n, hull) for n in xs + ys) + tuple((n, vhull) for n in vs))
    return SolveRequest(And(tuple(atoms)), domain, eps, k, workers=workers)


def shapley_residuals(game: ShapleyGame, x, y, v) -> np.ndarray:
    """Per-state largest gap between ``v_s`` and the stage payoff or a best response."""
    v = np.asarray(v, dtype=float).reshape(-1)
    out = np.empty(game.N)
    for s in range(game.N):
        G = game.rewards[s] + game.discount * np.tensordot(v, game.transitions[s], axes=([0], [0]))
        xs, ys = np.asarray(x[s], dtype=float), np.asarray(y[s], dtype=float)
        mixed = xs @ G @ ys
        out[s] = max(abs(v[s] - mixed), abs(v[s] - np.min(G @ ys)), abs(v[s] - np.max(xs @ G)))
    return out


def value_error_bound(game: ShapleyGame, residual: float) -> float:
    """Distance to the true value vector implied by a fixed-point residual."""
    return residual / (1.0 - game.discount)


# -- consensus halving -------------------------------------------------------------------

@dataclass(frozen=True)
class HalvingInstance:
    """Agent valuations ``F_i(t) = sum_e coeffs[i][e] t^e`` on [0, 1]."""

    coeffs: tuple
    max_degree: int = 8

    def __post_init__(self):
        polys = tuple(tuple(float(c) for c in row) for row in self.coeffs)
        if not polys:
            raise ValueError("at least one agent is required")
        for i, row in enumerate(polys):
            if not row:
                raise ValueError(f"agent {i + 1} has an empty valuation")
            if len(row) - 1 > self.max_degree:
                raise ValueError(f"agent {i + 1} valuation has degree {len(row) - 1} > {self.max_degree}")
        object.__setattr__(self, "coeffs", polys)

    @property
    def n(self) -> int:
        return len(self.coeffs)


def halving_hull(n: int) -> ConvexHull:
    """Vertices ``(0^j, 1^(n-j))`` for ``j = 0..n``; grid points are sorted cut vectors."""
    return ConvexHull([[0] * j + [1] * (n - j) for j in range(n + 1)])


def _signs(n: int):
    # interval m = 1..n+1 is [t_(m-1), t_m]; even intervals go to A+
    return [1 if m % 2 == 0 else -1 for m in range(n + 2)]


def halving_poly(inst: HalvingInstance, agent: int) -> TmvPolynomial:
    """``F(A+) - F(A-)`` for one agent as a polynomial in the cut vector ``t``."""
    n = inst.n
    a = inst.coeffs[agent]
    s = _signs(n)
    c = [s[i] - s[i + 1] for i in range(1, n + 1)]
    f1 = sum(a)
    constant = s[n + 1] * f1 + a[0] + sum(c) * a[0]
    terms = []
    for e in range(1, len(a)):
        if a[e] == 0:
            continue
        tensor = np.zeros((n,) * e)
        for i in range(n):
            tensor[(i,) * e] = c[i] * a[e]
        terms.append(StmPolynomial(DenseTensor(tensor), (e,), 0.0, ("t",)))
    if not terms:
        terms.append(StmPolynomial(DenseTensor(np.zeros(n)), (1,), 0.0, ("t",)))
    head = terms[0]
    terms[0] = StmPolynomial(head.tensor, head.exponents, constant, ("t",))
    return TmvPolynomial(tuple(terms))


def build_halving_request(inst: HalvingInstance, eps, k, workers: int | None = None) -> SolveRequest:
    """``|F_i(A+) - F_i(A-)| <= eps`` for every agent, over sorted cuts ``t``."""
    atoms = tuple(Atom(halving_poly(inst, i), Op.EQ, label=f"agent{i + 1}") for i in range(inst.n))
    domain = Domain((("t", halving_hull(inst.n)),))
    return SolveRequest(And(atoms), domain, eps, k, workers=workers,
                        notes=("equality atoms split into <= and >= pairs",))


def evaluate_cut(inst: HalvingInstance, cuts) -> np.ndarray:
    """``|F_i(A+) - F_i(A-)|`` per agent from the alternating interval sums."""
    t = np.asarray(cuts, dtype=float).reshape(-1)
    if t.shape != (inst.n,):
        raise DimensionError(f"expected {inst.n} cuts, got {t.shape[0]}")
    if np.any(np.diff(t) < 0):
        raise ValueError("cuts must be sorted")
    if t.size and (t[0] < 0 or t[-1] > 1):
        raise ValueError("cuts must lie in [0, 1]")
    bounds = np.concatenate(([0.0], t, [1.0]))
    out = np.empty(inst.n)
    for i, coeffs in enumerate(inst.coeffs):
        F = np.polynomial.polynomial.polyval(bounds, coeffs)
        plus = sum(F[m] - F[m - 1] for m in range(2, inst.n + 2, 2))
        minus = sum(F[m] - F[m - 1] for m in range(1, inst.n + 2, 2))
        out[i] = abs(plus - minus)
    return out
