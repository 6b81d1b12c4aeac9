"""Sample-size bounds for k-uniform grid search.

Every calculator returns the ceiling of its formula, never less than 1.
Formulas without a logarithm are evaluated in rational arithmetic so that
integer results are not pushed up by rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .domain import grid_size

__all__ = [
    "BoundInputs", "BoundReport",
    "k_main", "k_nontensor", "k_sqp", "k_multilinear", "k_standard_degree",
    "perturbation_bound", "eps_for_k_sqp", "bound_report",
]


def _check_eps(eps):
    if not eps > 0:
        raise ValueError("eps must be positive")


def _ceil(value) -> int:
    if isinstance(value, Fraction):
        return max(1, math.ceil(value))
    if not math.isfinite(value):
        raise OverflowError("bound exceeds float range")
    return max(1, math.ceil(value))


def _q(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class BoundInputs:
    alpha: float
    gamma: float
    n: int
    d: int
    t: int
    m: int
    eps: float
    l: int = 1

    def __post_init__(self):
        _check_eps(self.eps)
        if self.alpha < 0 or self.gamma < 0:
            raise ValueError("alpha and gamma must be non-negative")
        for name in ("n", "d", "t", "m", "l"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    @property
    def alpha1(self):
        return max(self.alpha, 1)

    @property
    def gamma1(self):
        return max(self.gamma, 1)


def k_main(alpha, gamma, n, d, t, m, eps) -> int:
    """``512 a^6 g^(2d+2) n^6 d^6 t^5 ln(2 a' g' d n m) / eps^5``."""
    b = BoundInputs(alpha, gamma, n, d, t, m, eps)
    pre = 512 * _q(alpha) ** 6 * _q(gamma) ** (2 * d + 2) * n ** 6 * d ** 6 * t ** 5 / _q(eps) ** 5
    log = math.log(2 * b.alpha1 * b.gamma1 * d * n * m)
    return _ceil(float(pre) * log)


def k_nontensor(alpha, gamma, d, t, l, eps) -> int:
    """``a^2 g^(2d-2) (2^d - 1)^2 t^2 ln(l) / eps^2`` (natural log)."""
    _check_eps(eps)
    if l < 1 or t < 1 or d < 1:
        raise ValueError("d, t and l must be at least 1")
    pre = _q(alpha) ** 2 * _q(gamma) ** (2 * d - 2) * (2 ** d - 1) ** 2 * t ** 2 / _q(eps) ** 2
    return _ceil(float(pre) * math.log(l))


def k_sqp(eps) -> int:
    """``32 ln(3/eps) / eps^3``, the product of ``16 ln(3/eps)/eps^2`` and ``2/eps``."""
    _check_eps(eps)
    return _ceil(32 * math.log(3 / eps) / eps ** 3)


def eps_for_k_sqp(k: int) -> float:
    """Smallest eps (to 1e-12) with ``k_sqp(eps) <= k``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    lo, hi = 1e-6, 3.0
    if k_sqp(lo) <= k:
        return lo
    for _ in range(200):
        mid = (lo + hi) / 2
        if k_sqp(mid) <= k:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return hi


def k_multilinear(alpha, gamma, n, m, eps) -> int:
    """``2 a^2 g^2 n^2 ln(3 n m) / eps^2``."""
    _check_eps(eps)
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    pre = 2 * _q(alpha) ** 2 * _q(gamma) ** 2 * n ** 2 / _q(eps) ** 2
    return _ceil(float(pre) * math.log(3 * n * m))


def k_standard_degree(alpha, gamma, d, eps) -> int:
    """``32 a^6 g^(2d) d^6 / eps^4``."""
    _check_eps(eps)
    if d < 1:
        raise ValueError("d must be at least 1")
    return _ceil(32 * _q(alpha) ** 6 * _q(gamma) ** (2 * d) * d ** 6 / _q(eps) ** 4)


def perturbation_bound(consts, terms, d, gamma, eps) -> float:
    """``g^(d-1) (2^d - 1) consts terms eps``; zero for constant polynomials."""
    if min(consts, terms, d, gamma, eps) < 0:
        raise ValueError("inputs must be non-negative")
    if d == 0:
        return 0.0
    return float(gamma) ** (d - 1) * (2 ** d - 1) * consts * terms * eps


@dataclass(frozen=True)
class BoundReport:
    k_main: int
    k_multilinear: int | None
    k_standard_degree: int
    k_nontensor: int | None
    k_sqp: int | None
    grid_sizes: dict
    enumerable: bool


def bound_report(inputs: BoundInputs, hull_sizes: dict | None = None,
                 budget: int = 10 ** 9, include_sqp: bool = False) -> BoundReport:
    """All applicable bounds plus the grid size each ``k_main`` implies.

    ``hull_sizes`` maps variable names to their vertex counts ``l``; when
    omitted a single variable with ``inputs.l`` vertices is assumed.
    """
    b = inputs
    km = k_main(b.alpha, b.gamma, b.n, b.d, b.t, b.m, b.eps)
    kml = k_multilinear(b.alpha, b.gamma, b.n, b.m, b.eps) if b.d == 1 else None
    ksd = k_standard_degree(b.alpha, b.gamma, b.d, b.eps)
    knt = k_nontensor(b.alpha, b.gamma, b.d, b.t, b.l, b.eps) if b.l > 1 else None
    hull_sizes = hull_sizes or {"x": b.l}
    sizes = {name: grid_size(l, km) for name, l in hull_sizes.items()}
    total = math.prod(sizes.values())
    return BoundReport(km, kml, ksd, knt, k_sqp(b.eps) if include_sqp else None,
                       sizes, total <= budget)
