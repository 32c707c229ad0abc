"""Generator correctness: frozen reference outputs and stream properties."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcc.rng import Xoshiro256StarStar, derive_stream_seed, splitmix64

# Published reference outputs for splitmix64 (seed 0 and seed 42).
SPLITMIX_SEED0 = [
    0xE220A8397B1DCDAF,
    0x6E789E6AA1B965F4,
    0x06C45D188009454F,
    0xF88BB8A8724C81EC,
]
SPLITMIX_SEED42 = [0xBDD732262FEB6E95, 0x28EFE333B266F103]

# xoshiro256** outputs for the state produced by splitmix64(0), and for the
# raw state (1, 2, 3, 4) used by the algorithm authors' reference tests.
XOSHIRO_FROM_SEED0 = [
    0x99EC5F36CB75F2B4,
    0xBF6E1F784956452A,
    0x1A5F849D4933E6E0,
    0x6AA594F1262D2D2C,
    0xBBA5AD4A1F842E59,
]
XOSHIRO_STATE_1234 = [0x2D00, 0x0, 0x5A007080, 0x10E0000000009D80, 0x10E0B61CE1009D80]


def test_splitmix64_reference_outputs():
    assert splitmix64(0, 4) == SPLITMIX_SEED0
    assert splitmix64(42, 2) == SPLITMIX_SEED42


def test_splitmix64_is_prefix_stable():
    assert splitmix64(0, 2) == SPLITMIX_SEED0[:2]


def test_xoshiro_reference_outputs_seed0():
    rng = Xoshiro256StarStar(0)
    assert [rng.next_uint64() for _ in range(5)] == XOSHIRO_FROM_SEED0


def test_xoshiro_reference_outputs_raw_state():
    rng = Xoshiro256StarStar(0)
    rng._s = [1, 2, 3, 4]
    assert [rng.next_uint64() for _ in range(5)] == XOSHIRO_STATE_1234


def test_fill_uint64_matches_scalar_path():
    a = Xoshiro256StarStar(9)
    b = Xoshiro256StarStar(9)
    assert a.fill_uint64(100).tolist() == [b.next_uint64() for _ in range(100)]


def test_doubles_unit_interval_and_mean():
    d = Xoshiro256StarStar(7).doubles(20000)
    assert d.min() >= 0.0
    assert d.max() < 1.0
    assert abs(d.mean() - 0.5) < 0.01


def test_normals_moments():
    z = Xoshiro256StarStar(7).normals(20001)
    assert abs(z.mean()) < 0.03
    assert 0.98 < z.std() < 1.02


def test_normals_odd_count_is_even_count_prefix():
    # the spare sine-branch draw is discarded, not deferred
    odd = Xoshiro256StarStar(3).normals(5)
    even = Xoshiro256StarStar(3).normals(6)
    assert np.array_equal(odd, even[:5])


def test_integers_below_range_and_determinism():
    vals = Xoshiro256StarStar(11).integers_below(6, 5000)
    assert vals.min() >= 0
    assert vals.max() <= 5
    assert set(np.unique(vals)) == set(range(6))
    again = Xoshiro256StarStar(11).integers_below(6, 5000)
    assert np.array_equal(vals, again)


def test_integers_below_rejects_nonpositive_bound():
    with pytest.raises(ValueError):
        Xoshiro256StarStar(0).integers_below(0, 1)


def test_shuffle_is_a_permutation():
    items = list(range(200))
    rng = Xoshiro256StarStar(5)
    shuffled = items.copy()
    rng.shuffle(shuffled)
    assert shuffled != items
    assert sorted(shuffled) == items


def test_shuffle_deterministic():
    a, b = list(range(50)), list(range(50))
    Xoshiro256StarStar(8).shuffle(a)
    Xoshiro256StarStar(8).shuffle(b)
    assert a == b


@given(st.integers(min_value=0, max_value=2**64 - 1), st.integers(min_value=0, max_value=2**32))
def test_derive_stream_seed_is_xor(seed, index):
    derived = derive_stream_seed(seed, index)
    assert 0 <= derived < 2**64
    assert derive_stream_seed(derived, index) == seed & (2**64 - 1)


def test_derived_streams_differ():
    base = Xoshiro256StarStar(derive_stream_seed(0, 1)).doubles(8)
    other = Xoshiro256StarStar(derive_stream_seed(0, 2)).doubles(8)
    assert not np.array_equal(base, other)
