import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from occupancy_lclt.distlib import Pmf, binomial_pmf, poisson_pmf, tv_distance
from occupancy_lclt.errors import DegenerateInput, InvalidArgument, PreconditionViolation
from occupancy_lclt.sizebias import (build_increment_law, conditional_pmf, coupled_law,
                                     sample_increment, sample_increments, size_bias_pmf)


def _max_gap(p, q):
    lo, hi = min(p.offset, q.offset), max(p.max_support, q.max_support)
    return float(np.max(np.abs(p.on_range(lo, hi) - q.on_range(lo, hi))))


def test_half_binomial_law_values():
    law = build_increment_law(binomial_pmf(2, 0.5), 1)
    assert law.q == pytest.approx(0.5)
    assert law.pi_at(1) == 1 and law.gamma_at(1) == 1
    assert law.pi_at(2) == 0 and law.gamma_at(0) == 0
    got = coupled_law(law)
    assert _max_gap(got, Pmf(0, np.array([0.5, 0.0, 0.5]))) < 1e-15


def test_sample_increment_examples(rng):
    law = build_increment_law(binomial_pmf(2, 0.5), 1)
    assert {sample_increment(law, 2, rng) for _ in range(200)} == {0}
    draws = np.array([sample_increment(law, 1, rng) for _ in range(4000)])
    assert set(np.unique(draws)) == {-1, 1}
    assert abs(draws.mean()) < 0.06
    with pytest.raises(InvalidArgument):
        sample_increment(law, 5, rng)


def test_d_outside_support_is_identity():
    base = binomial_pmf(6, 0.4)
    assert _max_gap(coupled_law(build_increment_law(base, 9)), base) < 1e-15


def test_binomial_20_d2():
    base = binomial_pmf(20, 0.1)
    assert _max_gap(coupled_law(build_increment_law(base, 2)), conditional_pmf(base, 2)) < 1e-12


@given(st.integers(1, 60), st.floats(0.02, 0.98), st.data())
def test_coupled_law_is_conditional_law(n, p, data):
    base = binomial_pmf(n, p)
    d = data.draw(st.integers(0, n))
    if base(d) >= 1 - 1e-15:
        return
    law = build_increment_law(base, d)
    assert np.all((law.pi >= 0) & (law.pi <= 1) & (law.gamma >= 0) & (law.gamma <= 1))
    assert _max_gap(coupled_law(law), conditional_pmf(base, d)) < 1e-12


@given(st.floats(0.5, 40), st.integers(0, 50))
def test_poisson_bases(lam, d):
    base = poisson_pmf(lam)
    if base(d) >= 1:
        return
    law = build_increment_law(base, d)
    assert _max_gap(coupled_law(law), conditional_pmf(base, d)) < 1e-12


def test_preconditions():
    with pytest.raises(PreconditionViolation):
        build_increment_law(Pmf(0, np.array([0.5, 0.0, 0.5])), 1)
    with pytest.raises(DegenerateInput):
        build_increment_law(Pmf.point_mass(3), 3)


def test_vectorised_sampler_matches_law(rng):
    base = binomial_pmf(12, 0.3)
    law = build_increment_law(base, 3)
    m = rng.binomial(12, 0.3, size=400_000)
    got = Pmf.from_samples(m + sample_increments(law, m, rng))
    assert tv_distance(got, coupled_law(law)) < 0.01


def test_size_bias_examples():
    assert size_bias_pmf(binomial_pmf(1, 0.5)) == Pmf.point_mass(1)
    sb = size_bias_pmf(binomial_pmf(2, 0.5))
    assert sb.offset == 1 and np.allclose(sb.weights, [0.5, 0.5])
    po = poisson_pmf(3.0)
    assert tv_distance(size_bias_pmf(po), po.shift(1)) < 1e-10
    with pytest.raises(DegenerateInput):
        size_bias_pmf(Pmf.point_mass(0))
