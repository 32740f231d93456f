import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from occupancy_lclt.er_model import ErdosRenyiModel, er_moments
from occupancy_lclt.errors import InvalidArgument, PreconditionViolation, ReliabilityWarning
from occupancy_lclt.steinlab import (BoundInputs, binmom_bound, branch_bound_check, brr_bounds,
                                     chernoff_tail, estimate_t_norms, estimate_upsilon,
                                     s2_bias_bound, t_norms_from_stream, write_bound_csv,
                                     yuting_check, Ingredient)


def test_brr_examples():
    res = brr_bounds(BoundInputs(mu=0, sigma=100, c1=2, c2=10))
    assert res.tv_bound == pytest.approx(0.1)
    assert res.loc_bound == pytest.approx(4 * (8 + 10 * math.e) / 1e4)
    zero = brr_bounds(BoundInputs(mu=0, sigma=5, c1=0, c2=0))
    assert zero.tv_bound == 0 and zero.loc_bound == 0
    gated = brr_bounds(BoundInputs(mu=0, sigma=4, c1=2, c2=1))
    assert gated.loc_bound is None and gated.reason
    with pytest.raises(InvalidArgument):
        BoundInputs(mu=0, sigma=0, c1=1, c2=1)


def test_binmom_examples():
    assert binmom_bound(1, 2) == pytest.approx(23.81, abs=0.01)
    assert binmom_bound(10, 2) == pytest.approx(64.43, abs=0.01)
    assert math.sqrt(1.75) <= binmom_bound(1, 2)


@given(st.integers(1, 200), st.floats(0.001, 0.999), st.integers(1, 8))
def test_binmom_dominates_binomial_norms(n, p, l):
    k = np.arange(n + 1)
    norm = float(np.sum(stats.binom.pmf(k, n, p) * k ** l) ** (1 / l))
    assert norm <= binmom_bound(n * p, l)


def test_chernoff_examples():
    assert chernoff_tail(3, 1) == pytest.approx(math.exp(-1))
    assert stats.binom.sf(6, 100, 0.03) <= math.exp(-1)
    with pytest.raises(InvalidArgument):
        chernoff_tail(3, 0.5)


@given(st.floats(0.1, 50), st.floats(1, 10), st.floats(0, 5))
def test_chernoff_monotone(mu, delta, step):
    assert chernoff_tail(mu, delta + step) <= chernoff_tail(mu, delta)
    assert chernoff_tail(mu + step, delta) <= chernoff_tail(mu, delta)


def test_branch_bound_examples(rng):
    e = rng.binomial(20, 0.3, size=100_000)
    assert branch_bound_check(np.zeros(10), 1.0, 3, np.zeros(10))
    assert branch_bound_check(e, 1.0, 3, e.astype(float))
    sums = rng.binomial(e, 0.5)
    assert branch_bound_check(e, 0.5 ** (1 / 3), 3, sums)


def test_yuting_constant_and_precondition():
    y = np.full(100, 3.0)
    res = yuting_check(y, y, 1.0, 3.0, 2)
    assert res.lhs == 0 and res.holds
    with pytest.raises(PreconditionViolation) as info:
        yuting_check(np.zeros(10), np.ones(10), 1.0, 0.0, 2)
    assert info.value.moments == (1.0, 0.0)


@pytest.mark.parametrize("r", [2, 4])
def test_yuting_on_er_coupling(r):
    model = ErdosRenyiModel(500, 1.0)
    ints, _, _ = model.coupling_block(0, 100_000, 17)
    mu = model.mean(0)
    res = yuting_check(ints[:, 0], ints[:, 1], mu, mu, r)
    assert res.holds


def test_t_norms_degenerate_stream(rng):
    out = t_norms_from_stream(np.full(2000, 4.0), 4.0, 1.0, [2, 3], rng, n_boot=20)
    assert all(t.value == 0 for t in out)


def test_t_norm_flag(rng):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = t_norms_from_stream(rng.random(1000), 0.5, 1.0, [12], rng, n_boot=10)
    assert out[0].unreliable
    assert any(issubclass(w.category, ReliabilityWarning) for w in caught)


def test_t_norms_on_er(rng):
    model = ErdosRenyiModel(100, 1.0)
    sigma = math.sqrt(er_moments(100, 1.0, 1)[1])
    norms, gd = estimate_t_norms(model, 1, [2], 4000, rng, sigma=sigma, n_boot=50)
    assert 0 < norms[0].value < 10 and norms[0].se > 0
    assert gd.size == 4000


def test_upsilon_small_model(rng):
    est = estimate_upsilon(ErdosRenyiModel(32, 1.0), 1, 200, 10_000, rng)
    assert est.upsilon >= 0 and est.se >= 0
    assert est.bias_bound > 0
    with pytest.raises(InvalidArgument):
        estimate_upsilon(ErdosRenyiModel(32, 1.0), 1, 10, 10_000, rng)


def test_s2_bias_bound_shrinks():
    assert s2_bias_bound(40, 10_000) > s2_bias_bound(40, 1_000_000)


def test_bound_csv():
    text = write_bound_csv({"c1": Ingredient(1.5, 0.1, "estimated")}, header_lines=["x=1"])
    assert text.splitlines() == ["# x=1", "ingredient,estimate,SE,provenance", 'c1,1.5,0.10000000000000001,"estimated"']
