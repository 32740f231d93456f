import math

import numpy as np
import pytest
from sklearn.base import clone
from hypothesis import given
from hypothesis import strategies as st

from occupancy_lclt.distlib import (Pmf, TranslatedPoissonFit, binomial_pmf, is_log_concave,
                                    loc_distance, poisson_pmf, smoothness, tp_params, tp_pmf,
                                    tp_vs_normal_gap, tv_distance)
from occupancy_lclt.errors import InvalidArgument, ResourceLimit

weights = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=12)
pmfs = st.builds(lambda o, w: Pmf.from_weights(o, w), st.integers(-5, 5), weights)


def test_pmf_rejects_bad_weights():
    with pytest.raises(InvalidArgument):
        Pmf(0, np.array([0.5, 0.4]))
    with pytest.raises(InvalidArgument):
        Pmf.from_weights(0, [0.0, 0.0])


def test_pmf_trims_zero_ends():
    p = Pmf.from_weights(3, [0, 0, 1, 1, 0])
    assert p.offset == 5 and len(p) == 2


@pytest.mark.parametrize("mu,s2,s,gamma,lam", [(10, 4, 6, 0.0, 4.0), (10.5, 4, 6, 0.5, 4.5),
                                               (0, 2.3, -3, 0.7, 3.0)])
def test_tp_params_examples(mu, s2, s, gamma, lam):
    p = tp_params(mu, s2)
    assert p.s == s
    assert p.gamma == pytest.approx(gamma, abs=1e-12)
    assert p.lam == pytest.approx(lam, abs=1e-12)


def test_tp_params_rejects_non_finite():
    with pytest.raises(InvalidArgument):
        tp_params(float("nan"), 1.0)
    with pytest.raises(InvalidArgument):
        tp_params(0.0, float("inf"))


def test_tp_pmf_shifted_poisson():
    p = tp_pmf(tp_params(0, 1))
    assert p(-1) == pytest.approx(math.exp(-1), rel=1e-12)


@given(st.floats(-50, 50), st.floats(0.5, 200))
def test_tp_pmf_moments(mu, s2):
    params = tp_params(mu, s2)
    p = tp_pmf(params)
    assert p.mean() == pytest.approx(mu, abs=1e-7)
    assert s2 - 1e-7 <= p.var() < s2 + 1 + 1e-7


def test_poisson_support_cap():
    with pytest.raises(ResourceLimit):
        poisson_pmf(1e14)


def test_distance_examples():
    d0, d1 = Pmf.point_mass(0), Pmf.point_mass(1)
    half = Pmf(0, np.array([0.5, 0.5]))
    assert tv_distance(d0, d0) == 0
    assert tv_distance(d0, d1) == 1
    assert tv_distance(half, d0) == 0.5
    assert loc_distance(d0, d1) == 1
    assert loc_distance(half, Pmf(0, np.array([0.25, 0.75]))) == 0.25


@given(pmfs, pmfs, pmfs)
def test_distance_axioms(p, q, r):
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)
    assert 0 <= loc_distance(p, q) <= tv_distance(p, q) + 1e-15
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12


@given(pmfs, st.integers(-10, 10))
def test_distances_shift_invariant(p, k):
    q = poisson_pmf(2.0)
    assert tv_distance(p.shift(k), q.shift(k)) == pytest.approx(tv_distance(p, q), abs=1e-15)


def test_smoothness_examples():
    assert smoothness(Pmf.point_mass(3), 1) == 2
    assert smoothness(Pmf.point_mass(3), 2) == 4
    assert smoothness(binomial_pmf(1, 0.5), 2) == pytest.approx(2.0)


@given(pmfs, st.integers(1, 4))
def test_smoothness_bounds(p, l):
    assert 0 < smoothness(p, l) <= 2 ** l + 1e-12
    assert smoothness(p, l) == pytest.approx(smoothness(p.shift(7), l))


@given(pmfs)
def test_smoothness_matches_sup_definition(p):
    # sup over |h| <= 1 of E[Delta h(W)] is attained at h = sign of the first difference
    w = np.pad(p.weights, 1)
    diff = np.diff(w)
    h = np.sign(-diff)
    assert smoothness(p, 1) == pytest.approx(float(np.sum(h * -diff)))


def test_csv_round_trip_is_exact():
    p = Pmf.from_weights(-3, np.random.default_rng(1).random(40))
    q = Pmf.from_csv(p.to_csv())
    assert q == p


@given(pmfs)
def test_csv_round_trip_property(p):
    assert Pmf.from_csv(p.to_csv()) == p


def test_log_concavity_examples():
    assert is_log_concave(binomial_pmf(10, 0.3))
    assert not is_log_concave(Pmf(0, np.array([0.5, 0.0, 0.5])))
    assert is_log_concave(Pmf.point_mass(0))


@given(st.integers(1, 80), st.floats(0.01, 0.99))
def test_binomial_is_log_concave(n, p):
    assert is_log_concave(binomial_pmf(n, p))


def test_tp_normal_gap_bounded():
    vals = [tp_vs_normal_gap(tp_params(mu, s2)) * s2 for mu in (0, 0.5) for s2 in (1, 4, 16, 64)]
    assert max(vals) < 0.5
    with pytest.raises(InvalidArgument):
        tp_vs_normal_gap(tp_params(0, 0.5))


def test_translated_poisson_estimator(rng):
    x = rng.poisson(30.0, size=200_000) - 5
    est = TranslatedPoissonFit().fit(x)
    assert est.sigma2_ <= est.params_.lam < est.sigma2_ + 1
    assert est.sigma2_ == pytest.approx(30.0, rel=0.02)
    assert est.tv_distance() < 0.02
    assert est.score(x) == -est.tv_distance()
    assert est.get_params() == {"mu": None, "sigma2": None, "support_eps": 1e-12}
    fixed = clone(est).set_params(mu=20.0).fit(x)
    assert fixed.mu_ == 20.0 and fixed.tv_distance() > est.tv_distance()
