from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssafsim.codes import CODES, ConvCode, get_code

from oracles import free_distance, rsc_encode

EXPECTED_DFREE = {"rsc-23-35": 7, "rsc-133-171": 10, "rsc-2of3-punct": 3, "rsc-1of3": 7}
EXPECTED_RATE = {"rsc-23-35": Fraction(1, 2), "rsc-133-171": Fraction(1, 2), "rsc-2of3-punct": Fraction(2, 3), "rsc-1of3": Fraction(1, 3)}


@pytest.mark.parametrize("name", sorted(CODES))
def test_free_distance(name):
    c = get_code(name)
    assert free_distance(c.feedback, c.feedforward, c.puncture) == EXPECTED_DFREE[name]


@pytest.mark.parametrize("name", sorted(CODES))
def test_rate(name):
    assert get_code(name).rate == EXPECTED_RATE[name]


@pytest.mark.parametrize("name", sorted(CODES))
def test_encoder_matches_reference(name):
    c = get_code(name)
    rng = np.random.default_rng(1)
    info = rng.integers(0, 2, size=(20, 17), dtype=np.uint8)
    got = c.encode(info)
    for u, cw in zip(info, got):
        np.testing.assert_array_equal(cw, rsc_encode(c.feedback, c.feedforward, c.puncture, u))
    assert got.shape[1] == c.n_coded(17)


@pytest.mark.parametrize("name", sorted(CODES))
def test_zero_input_and_systematic_bits(name):
    c = get_code(name)
    assert not c.encode(np.zeros((1, 12), np.uint8)).any()
    rng = np.random.default_rng(2)
    info = rng.integers(0, 2, size=(4, 12), dtype=np.uint8)
    cw = c.encode(info)
    np.testing.assert_array_equal(cw[:, c.systematic_positions(12)[:12]], info)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(CODES)), st.integers(0, 2**14 - 1), st.integers(0, 2**14 - 1))
def test_linearity(name, a, b):
    c = get_code(name)
    bits = lambda v: np.array([(v >> i) & 1 for i in range(14)], np.uint8)  # noqa: E731
    x, y = bits(a), bits(b)
    np.testing.assert_array_equal(c.encode(x ^ y), c.encode(x) ^ c.encode(y))


def test_k_for_length():
    assert get_code("rsc-23-35").k_for_length(1296) == 644
    assert get_code("rsc-2of3-punct").k_for_length(240) == 158
    for name in CODES:
        c = get_code(name)
        assert c.n_coded(c.k_for_length(1296)) == 1296
    with pytest.raises(ValueError):
        get_code("rsc-1of3").k_for_length(1297)


def test_depuncture_round_trip():
    c = get_code("rsc-2of3-punct")
    v = np.arange(c.n_coded(10), dtype=float) + 1
    grid = c.depuncture(v, 10)
    assert grid.shape == (12, 2)
    np.testing.assert_array_equal(grid[c.keep_mask(12)], v)
    assert np.count_nonzero(grid == 0) == 6


def test_rejections():
    with pytest.raises(ValueError):
        ConvCode("bad", 0o7, (0o5,), ((0, 1), (1, 1)))
    with pytest.raises(ValueError):
        ConvCode("bad", 0o3, (0o5,))  # feedback lacks the D^0 tap
    with pytest.raises(KeyError):
        get_code("turbo")
