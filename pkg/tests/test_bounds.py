import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from etr_approx.bounds import (BoundInputs, bound_report, eps_for_k_sqp, k_main, k_multilinear, k_nontensor,
                               k_sqp, k_standard_degree, perturbation_bound)


def test_stated_values():
    assert k_main(1, 1, 1, 1, 1, 1, 1) == 355 == math.ceil(512 * math.log(2))
    assert k_sqp(0.5) == 459
    assert k_sqp(1) == 36
    assert k_multilinear(1, 1, 1, 1, 1) == 3
    assert k_standard_degree(1, 1, 1, 1) == 32
    assert k_standard_degree(1, 1, 2, 1) == 2048
    assert k_nontensor(1, 1, 1, 1, math.e, 1) == 1


def test_scaling_relations():
    # pre-log factor of k_main scales by gamma^4 at d=1 and by 32 when eps halves
    base = 512 * math.log(2 * 2 * 1 * 1 * 1)
    assert k_main(1, 2, 1, 1, 1, 1, 1) == math.ceil(16 * base)
    assert k_main(1, 1, 1, 1, 1, 1, 0.5) == math.ceil(32 * 512 * math.log(2))
    assert k_standard_degree(1, 1, 1, 0.5) == 16 * 32
    assert k_nontensor(1, 1, 2, 1, 100, 1) == math.ceil(9 * math.log(100))
    assert k_nontensor(1, 1, 1, 1, 100, 0.1) == math.ceil(100 * math.log(100))


def test_k_sqp_is_product_of_parts():
    for eps in (0.05, 0.1, 0.3, 0.7):
        k = 16 * math.log(3 / eps) / eps ** 2
        r = 2 / eps
        assert k_sqp(eps) == math.ceil(k * r)


def test_eps_for_k_sqp_inverts():
    for k in (36, 100, 459, 5000):
        eps = eps_for_k_sqp(k)
        assert k_sqp(eps) <= k
        assert k_sqp(eps * (1 - 1e-6)) > k or eps <= 1e-6


def test_perturbation_examples():
    assert perturbation_bound(1, 1, 2, 1, 0.1) == pytest.approx(0.3)
    assert abs(1 ** 2 - 0.9 ** 2) <= perturbation_bound(1, 1, 2, 1, 0.1)
    assert perturbation_bound(3, 2, 1, 5, 0.25) == 3 * 2 * 0.25
    assert perturbation_bound(3, 2, 3, 1, 0) == 0
    assert perturbation_bound(3, 2, 0, 1, 0.5) == 0
    with pytest.raises(ValueError):
        perturbation_bound(-1, 1, 1, 1, 0.1)


@pytest.mark.parametrize("fn,args", [(k_main, (1, 1, 1, 1, 1, 1)), (k_sqp, ()),
                                     (k_multilinear, (1, 1, 1, 1)), (k_standard_degree, (1, 1, 1)),
                                     (k_nontensor, (1, 1, 1, 1, 2))])
@pytest.mark.parametrize("eps", [0, -0.5])
def test_non_positive_eps_rejected(fn, args, eps):
    with pytest.raises(ValueError):
        fn(*args, eps)


def test_bound_inputs_validation():
    b = BoundInputs(0.5, 2, 1, 1, 1, 1, 0.1)
    assert (b.alpha1, b.gamma1) == (1, 2)
    with pytest.raises(ValueError):
        BoundInputs(1, 1, 0, 1, 1, 1, 0.1)


def test_bound_report_grid_sizes():
    rep = bound_report(BoundInputs(1, 1, 1, 1, 1, 1, 1, l=3), include_sqp=True)
    assert rep.k_main == 355
    assert rep.grid_sizes == {"x": math.comb(355 + 2, 2)}
    assert rep.enumerable
    assert rep.k_multilinear == 3 and rep.k_sqp == 36
    big = bound_report(BoundInputs(1, 1, 1, 1, 1, 1, 0.01, l=10))
    assert not big.enumerable


pos = st.floats(0.05, 4, allow_nan=False)
small = st.integers(1, 4)


@settings(max_examples=150, deadline=None)
@given(a=pos, g=st.floats(1, 3), n=small, d=small, t=small, m=small, l=st.integers(2, 20),
       eps=st.floats(0.05, 2), factor=st.floats(1.0, 3.0))
def test_monotone_in_every_argument(a, g, n, d, t, m, l, eps, factor):
    # gamma >= 1 here: with gamma < 1 the powers of gamma fall as d grows
    base = dict(alpha=a, gamma=g, n=n, d=d, t=t, m=m, eps=eps)

    def km(**kw):
        args = {**base, **kw}
        return k_main(args["alpha"], args["gamma"], args["n"], args["d"], args["t"], args["m"], args["eps"])

    k0 = km()
    assert km(eps=eps * factor) <= k0
    assert km(alpha=a * factor) >= k0
    assert km(gamma=g * factor) >= k0
    for name in ("n", "d", "t", "m"):
        assert km(**{name: base[name] + 1}) >= k0
    assert k_nontensor(a, g, d, t, l, eps * factor) <= k_nontensor(a, g, d, t, l, eps)
    assert k_nontensor(a, g, d + 1, t, l, eps) >= k_nontensor(a, g, d, t, l, eps)
    assert k_nontensor(a, g, d, t, l + 1, eps) >= k_nontensor(a, g, d, t, l, eps)
    assert k_multilinear(a, g, n, m, eps * factor) <= k_multilinear(a, g, n, m, eps)
    assert k_multilinear(a, g, n + 1, m + 1, eps) >= k_multilinear(a, g, n, m, eps)
    assert k_standard_degree(a, g, d + 1, eps) >= k_standard_degree(a, g, d, eps)
    assert k_standard_degree(a, g, d, eps * factor) <= k_standard_degree(a, g, d, eps)
    assume(eps * factor < 3)
    assert k_sqp(eps * factor) <= k_sqp(eps)


def test_gamma_below_one_can_shrink_with_degree():
    # documented exception to monotonicity in d
    assert k_nontensor(1, 0.1, 3, 1, 10, 0.01) < k_nontensor(1, 0.1, 1, 1, 10, 0.01)
