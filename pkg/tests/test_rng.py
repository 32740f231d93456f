import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from occupancy_lclt.rng import block_seed, derive_stream, tag_of

u64 = st.integers(0, 2**64 - 1)


def test_same_triple_replays():
    a = derive_stream(1, 2, 3).random(1_000_000)
    b = derive_stream(1, 2, 3).random(1_000_000)
    assert np.array_equal(a, b)


def test_tags_decorrelate():
    n = 100_000
    a = derive_stream(7, 0, tag_of("a")).random(n)
    b = derive_stream(7, 0, tag_of("b")).random(n)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(n)


@given(u64, u64, u64, u64)
def test_distinct_triples_differ(m, r, t, t2):
    if t == t2:
        return
    assert not np.array_equal(derive_stream(m, r, t).random(4), derive_stream(m, r, t2).random(4))


def test_tag_is_stable():
    assert tag_of("rates", "ER", 1.0, 0) == tag_of("rates", "ER", 1.0, 0)
    assert tag_of("a", 1) != tag_of("a", 2)
    assert 0 <= block_seed(1, 2, 3) < 2**32
