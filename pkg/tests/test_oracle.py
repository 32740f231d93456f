import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from occupancy_lclt.distlib import Pmf, binomial_pmf, poisson_pmf, tv_distance
from occupancy_lclt.er_model import degree_law, er_moments
from occupancy_lclt.errors import DegenerateInput, ResourceLimit
from occupancy_lclt.oracle import (chi_square_gof, enumeration_tally, er_exact_coupling, er_exact_pmf,
                                   er_exact_size_bias_pmf)


def test_exact_examples():
    assert np.allclose(er_exact_pmf(2, 1.0, 0).pmf.on_range(0, 2), [0.5, 0.0, 0.5])
    assert er_exact_pmf(3, 3.0, 2).pmf == Pmf.point_mass(0)


def test_caps():
    with pytest.raises(ResourceLimit):
        er_exact_pmf(8, 1.0, 0)
    with pytest.raises(ResourceLimit):
        er_exact_size_bias_pmf(6, 1.0, 0)
    with pytest.raises(DegenerateInput):
        er_exact_size_bias_pmf(3, 3.0, 2)


@given(st.integers(2, 6), st.integers(0, 3), st.integers(0, 8))
def test_tally_independent_of_split(n, d, high_bits):
    t = enumeration_tally(n, d)
    assert np.array_equal(t, enumeration_tally(n, d, high_bits=high_bits))
    assert t.sum() == 2 ** (n * (n - 1) // 2)


def test_tally_threads_agree():
    assert np.array_equal(enumeration_tally(7, 1, 6, threads=4), enumeration_tally(7, 1, 2))


def test_edge_count_marginal_is_binomial():
    t = enumeration_tally(5, 0)
    per_k = t.sum(axis=1)
    from math import comb
    assert list(per_k) == [comb(10, k) for k in range(11)]


@pytest.mark.parametrize("d", [0, 1])
def test_exact_coupling_realises_size_bias(d):
    law = degree_law(4, 2.0, d)
    ws, egd, ecgd = er_exact_coupling(4, 2.0, d, law)
    assert tv_distance(ws, er_exact_size_bias_pmf(4, 2.0, d)) < 1e-13
    var = er_moments(4, 2.0, d)[1]
    assert egd == pytest.approx(var, abs=1e-12)
    assert ecgd == pytest.approx(var, abs=1e-12)


def test_gof_calibration():
    target = binomial_pmf(30, 0.4)
    rejections = 0
    for seed in range(200):
        x = np.random.default_rng(seed).binomial(30, 0.4, size=5_000)
        rejections += chi_square_gof(x, target)[1] < 0.01
    assert rejections <= 8


def test_gof_power(rng):
    target = poisson_pmf(20.0)
    x = rng.poisson(20.0, size=100_000) + 1
    assert chi_square_gof(x, target)[1] < 1e-6


def test_gof_single_cell():
    with pytest.raises(DegenerateInput):
        chi_square_gof(np.zeros(3, dtype=int), Pmf.point_mass(0))
