import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intloc.dist_zoo import ZOO_NAMES, builtin
from intloc.edgeworth import (CumulantSet, IntervalQuery, cdf_difference_approx, edgeworth_cdf,
                              hermite_che, normal_density, refined_approx, refined_terms,
                              stone_approx)
from intloc.rates import mass_check

# 50-digit re-evaluations of the closed forms
REFINED_EXP_64_8 = 0.0068133032782896809106
EDGEWORTH_2_6_100_1 = 0.8417480306094081875


def test_normal_density_examples():
    assert normal_density(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert normal_density(1.0) == pytest.approx(0.2419707245, abs=1e-10)
    t = np.linspace(0, 9, 37)
    assert np.array_equal(normal_density(t), normal_density(-t))


def test_hermite_examples():
    assert hermite_che(2, 0.0) == -1.0
    assert hermite_che(3, 1.0) == -2.0
    assert hermite_che(5, 1.0) == 6.0
    assert hermite_che(0, 3.0) == 1.0


def test_hermite_explicit_polynomials():
    x = np.random.default_rng(0).uniform(-4, 4, 100)
    explicit = [np.ones_like(x), x, x**2 - 1, x**3 - 3 * x, x**4 - 6 * x**2 + 3,
                x**5 - 10 * x**3 + 15 * x]
    for k, ref in enumerate(explicit):
        np.testing.assert_allclose(hermite_che(k, x), ref, rtol=1e-10, atol=1e-12)


def test_hermite_rejects_bad_degree():
    with pytest.raises(ValueError):
        hermite_che(11, 0.5)
    with pytest.raises(ValueError):
        hermite_che(-1, 0.5)


def test_stone_examples():
    assert stone_approx(IntervalQuery(100, 0, 0.5)) == pytest.approx(0.0199471140, abs=1e-10)
    assert stone_approx(IntervalQuery(4, 2, 0.1)) == pytest.approx(0.0120985362, abs=1e-10)
    assert stone_approx(IntervalQuery(1, 10, 1)) == pytest.approx(7.6945986e-23, rel=1e-7)


def test_interval_query_validation():
    with pytest.raises(ValueError):
        IntervalQuery(0, 0.0, 1.0)
    with pytest.raises(ValueError):
        IntervalQuery(4, 0.0, 0.0)
    assert IntervalQuery(16, 8.0, 1.0).v == 2.0


def test_refined_examples():
    exp = builtin("std_exponential")
    b = refined_approx(exp, IntervalQuery(100, 0, 0.5))
    assert b.total == pytest.approx(0.0199471140, abs=1e-10)
    assert b.skew_term == 0 and b.delta_term == 0
    b = refined_approx(exp, IntervalQuery(64, 8, 0.25))
    assert b.total == pytest.approx(REFINED_EXP_64_8, rel=1e-14)


def test_refined_high_precision_recomputation():
    mp.mp.dps = 40
    for n, x, d in [(64, 8.0, 0.25), (9, -7.5, 1.3), (1000, 40.0, 0.01)]:
        b = refined_approx(2.0, IntervalQuery(n, x, d))
        v = mp.mpf(x) / mp.sqrt(n)
        stone = mp.mpf(d) / mp.sqrt(n) * mp.npdf(v)
        ref = stone * (1 + 2 * v * (v * v - 3) / (6 * mp.sqrt(n)) - mp.mpf(d) * v / (2 * mp.sqrt(n)))
        assert b.total == pytest.approx(float(ref), rel=1e-13)


@given(st.integers(1, 10**6), st.floats(-50, 50), st.floats(1e-6, 10), st.floats(-5, 5))
@settings(max_examples=200, deadline=None)
def test_refined_breakdown_properties(n, x, delta, mu3):
    b = refined_approx(mu3, IntervalQuery(n, x, delta))
    scale = abs(b.stone_term) + abs(b.skew_term) + abs(b.delta_term)
    assert abs(b.total - (b.stone_term + b.skew_term + b.delta_term)) <= 1e-14 * scale
    assert b.stone_term >= 0
    per = b.per_unit(delta)
    assert per.total == pytest.approx(b.total / delta, rel=1e-15)


@pytest.mark.parametrize("n,x,delta", [(16, 4.0, 0.25), (3, -1.0, 2.0), (400, 35.0, 0.5)])
def test_uniform_skew_term_is_zero(n, x, delta):
    assert refined_approx(builtin("std_uniform"), IntervalQuery(n, x, delta)).skew_term == 0


def test_refined_reduces_to_stone():
    for n, x, d in [(4, 2.0, 0.1), (50, -3.0, 0.7), (1, 0.3, 1.0)]:
        stone, skew, _ = refined_terms(0.0, n, x, d)
        assert stone + skew == stone_approx(IntervalQuery(n, x, d))


def test_refined_vectorized_matches_scalar():
    xs = np.linspace(-20, 20, 41)
    s, k, t = refined_terms(2.0, 64, xs, 0.5)
    for i, x in enumerate(xs):
        b = refined_approx(2.0, IntervalQuery(64, float(x), 0.5))
        assert (s[i], k[i], t[i]) == (b.stone_term, b.skew_term, b.delta_term)


def test_refined_total_can_be_negative():
    b = refined_approx(builtin("std_exponential"), IntervalQuery(4, -7.0, 0.5))
    assert b.total < 0 <= b.stone_term


def test_edgeworth_cdf_examples():
    assert edgeworth_cdf(CumulantSet(0, 0), 7, 0.0) == 0.5
    assert edgeworth_cdf(CumulantSet(0, 6), 10, 0.0) == 0.5
    assert edgeworth_cdf(CumulantSet(2, 6), 100, 1.0) == pytest.approx(EDGEWORTH_2_6_100_1,
                                                                         rel=1e-14)
    assert CumulantSet.from_moments(2.0, 9.0) == CumulantSet(2.0, 6.0)


def test_edgeworth_cdf_tracks_exact_gamma():
    # S_n + n ~ Gamma(n); the two-term expansion error is o(1/n)
    from scipy import stats
    n = 400
    v = np.linspace(-3, 3, 13)
    exact = stats.gamma(n).cdf(n + v * math.sqrt(n))
    approx = edgeworth_cdf(CumulantSet(2.0, 6.0), n, v)
    assert np.max(np.abs(exact - approx)) < 1e-4


def test_cdf_difference_examples():
    cum = CumulantSet(2.0, 6.0)
    q = IntervalQuery(100, 5.0, 0.5)
    ref = refined_approx(builtin("std_exponential"), q).total
    assert cdf_difference_approx(cum, q) == pytest.approx(ref, rel=1e-14)
    q0 = IntervalQuery(100, 0.0, 0.5)
    assert cdf_difference_approx(cum, q0) == stone_approx(q0)
    q1 = IntervalQuery(25, 5.0, 0.2)
    expect = 0.2 * normal_density(1.0) / 5 * (1 - 0.2 / (2 * 5))
    assert cdf_difference_approx(CumulantSet(0.0, 1.0), q1) == pytest.approx(expect, rel=1e-14)


@pytest.mark.parametrize("name", ZOO_NAMES)
@pytest.mark.parametrize("n", [16, 64])
@pytest.mark.parametrize("delta", [0.25, 1.0])
def test_partition_of_unity(name, n, delta):
    assert mass_check(builtin(name), n, delta) <= 1e-3
