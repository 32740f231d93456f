import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from occupancy_lclt.distlib import Pmf, tv_distance
from occupancy_lclt.er_model import (ErdosRenyiModel, ErSample, apply_step, conditional_gd,
                                     degree_law, er_moments, occupancy_probability, sample_graph,
                                     size_bias_step, t_statistics, u_statistic, w_d)
from occupancy_lclt.errors import DegenerateInput, InvalidArgument
from occupancy_lclt.oracle import er_exact_pmf, er_step_law

graphs = st.builds(lambda n, lam, seed: sample_graph(n, min(lam, n), np.random.default_rng(seed)),
                   st.integers(2, 40), st.floats(0.1, 4.0), st.integers(0, 2**32))


def test_complete_and_empty_examples(rng):
    g = sample_graph(3, 3.0, rng)
    assert list(g.degrees) == [2, 2, 2]
    tiny = sample_graph(5, 1e-12, rng)
    assert tiny.n_edges == 0
    assert w_d(ErSample.empty(4), 0) == 0
    assert w_d(ErSample.empty(4), 1) == 4
    assert w_d(ErSample.complete(4), 3) == 0


def test_lambda_above_n_rejected(rng):
    with pytest.raises(InvalidArgument):
        sample_graph(3, 3.5, rng)
    with pytest.raises(InvalidArgument):
        sample_graph(1, 0.5, rng)


@given(graphs)
def test_sample_invariants(g):
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    assert int(g.degrees.sum()) == 2 * g.n_edges
    assert np.array_equal(g.adjacency.sum(axis=1), g.degrees)


@given(graphs)
def test_text_round_trip(g):
    h = ErSample.from_text(g.to_text(), g.lam)
    assert np.array_equal(h.edges, g.edges)


def test_moment_examples():
    assert er_moments(2, 1.0, 0) == pytest.approx((1.0, 1.0))
    assert er_moments(4, 2.0, 0)[0] == pytest.approx(3.5)
    with pytest.raises(DegenerateInput) as info:
        er_moments(3, 3.0, 2)
    assert info.value.mu_d == 0.0


@given(st.integers(2, 7), st.sampled_from([0.5, 1.0, 1.5]), st.integers(0, 4))
def test_moments_match_enumeration(n, lam, d):
    mu, var = er_moments(n, lam, d)
    exact = er_exact_pmf(n, lam, d)
    assert mu == pytest.approx(exact.mean, abs=1e-10)
    assert var == pytest.approx(exact.variance, abs=1e-10)


def test_degree_beyond_n_minus_one():
    mu, var = er_moments(5, 1.0, 9)
    assert mu == 5 and var == pytest.approx(0.0, abs=1e-12)


def test_w_samples_distribution():
    model = ErdosRenyiModel(6, 1.5)
    w = model.w_samples([1], 200_000, 11)[:, 0]
    assert tv_distance(Pmf.from_samples(w), er_exact_pmf(6, 1.5, 1).pmf) < 0.01


def test_w_samples_deterministic():
    model = ErdosRenyiModel(300, 1.0)
    a = model.w_samples([0, 1], 500, 5)
    assert np.array_equal(a, model.w_samples([0, 1], 500, 5))
    assert not np.array_equal(a, model.w_samples([0, 1], 500, 6))


def test_conditional_gd_examples():
    assert conditional_gd(ErSample.empty(3, 1.0), 0) == pytest.approx(10 / 3)
    assert conditional_gd(ErSample.complete(3), 2) == 0.0


@given(graphs, st.integers(0, 3))
def test_conditional_gd_equals_step_enumeration(g, d):
    if occupancy_probability(g.n, g.lam, d) >= 1.0 or g.lam >= g.n:
        return
    law = degree_law(g.n, g.lam, d)
    step = er_step_law(g, d, law)
    mu = er_moments(g.n, g.lam, d)[0]
    direct = mu * sum(k * v for k, v in step.items())
    assert conditional_gd(g, d, law) == pytest.approx(direct, rel=1e-10, abs=1e-12)
    assert max(abs(k) for k in step) <= 2
    assert sum(step.values()) == pytest.approx(1.0)


@given(graphs, st.integers(0, 3))
def test_t_statistics_shape(g, d):
    if g.lam >= g.n:
        return
    t = t_statistics(g, d)
    assert t.shape == (6,) and np.all(np.isfinite(t))
    assert np.isfinite(u_statistic(g, d))


def test_size_bias_step_records(rng):
    g = sample_graph(30, 2.0, rng)
    law = degree_law(30, 2.0, 1)
    for _ in range(300):
        rec = size_bias_step(g, 1, law, rng)
        after = apply_step(g, rec)
        assert w_d(after, 1) == rec.w_s
        assert abs(rec.d_incr) <= 2
        if rec.x:
            assert after.degrees[rec.i_chosen] - g.degrees[rec.i_chosen] == rec.x


def test_coupling_block_mean_matches_variance():
    model = ErdosRenyiModel(40, 1.0)
    ints, gd, _ = model.coupling_block(1, 200_000, 3)
    mu, var = er_moments(40, 1.0, 1)
    d = ints[:, 1] - ints[:, 0]
    assert np.max(np.abs(d)) <= 2
    se = gd.std() / math.sqrt(gd.size)
    assert abs(gd.mean() - var) < 5 * se
    se_d = mu * d.std() / math.sqrt(d.size)
    assert abs(mu * d.mean() - var) < 5 * se_d
