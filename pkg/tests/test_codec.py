import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featherwave.codec import (CodecError, MuLawCodec, combine_coarse_fine, de_emphasis,
                               pre_emphasis, split_coarse_fine)

codec = MuLawCodec(10)


def inverse_compand(v, mu=1023):
    return math.copysign(((1 + mu) ** abs(v) - 1) / mu, v)


class TestEmphasis:
    def test_worked_example(self):
        np.testing.assert_allclose(pre_emphasis([1, 1, 1], 0.85), [1, 0.15, 0.15], atol=1e-15)

    def test_zero_alpha_identity(self):
        x = np.random.default_rng(0).standard_normal(50)
        np.testing.assert_array_equal(pre_emphasis(x, 0.0), x)

    def test_inverse(self):
        x = np.random.default_rng(1).uniform(-1, 1, 1000)
        y = pre_emphasis(x, 0.85)
        # independent inverse recursion
        z = np.zeros_like(y)
        for n in range(len(y)):
            z[n] = y[n] + 0.85 * (z[n - 1] if n else 0.0)
        np.testing.assert_allclose(de_emphasis(y, 0.85), z, atol=0)
        assert np.max(np.abs(de_emphasis(y, 0.85) - x)) < 1e-9


class TestMuLaw:
    def test_constants(self):
        assert (codec.mu, codec.levels, codec.q_root) == (1023, 1024, 32)

    def test_zero_maps_mid_scale(self):
        assert codec.encode_scalar(0.0) == 512
        assert codec.encode(0.0) == 512

    def test_saturation(self):
        assert codec.encode_scalar(1.0) == 1023
        assert codec.encode_scalar(5.0) == 1023
        assert codec.encode_scalar(-3.0) == 0

    def test_round_trip_within_bin_width(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, 10000)
        idx = codec.encode(x)
        err = np.abs(codec.decode(idx) - x)
        # bin widths from the inverse companding formula, independently of the codec
        lo = np.array([inverse_compand(i * 2 / 1024 - 1) for i in idx])
        hi = np.array([inverse_compand((i + 1) * 2 / 1024 - 1) for i in idx])
        assert np.all(err <= hi - lo)
        assert np.all((x >= lo - 1e-15) & (x <= hi + 1e-15))

    def test_decode_zero_bin(self):
        lo, hi = codec.bin_edges(512)
        assert abs(codec.decode(512)) < hi - lo

    def test_decode_top(self):
        expected = inverse_compand(1023.5 * 2 / 1024 - 1)
        assert codec.decode(1023) == pytest.approx(expected, rel=1e-12)
        assert codec.decode(1023) > 0.99

    def test_exhaustive_index_round_trip(self):
        idx = np.arange(1024)
        np.testing.assert_array_equal(codec.encode(codec.decode(idx)), idx)
        assert all(codec.encode_scalar(float(codec.decode(i))) == i for i in range(1024))

    def test_decode_out_of_range(self):
        with pytest.raises(CodecError):
            codec.decode(1024)
        with pytest.raises(CodecError):
            codec.decode(-1)

    def test_odd_bits_rejected(self):
        with pytest.raises(CodecError):
            MuLawCodec(9)

    def test_symmetry_at_bin_centres(self):
        centres = codec.decode(np.arange(1024))
        np.testing.assert_array_equal(codec.encode(-centres), 1023 - codec.encode(centres))

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert codec.encode_scalar(lo) <= codec.encode_scalar(hi)

    @settings(max_examples=300)
    @given(st.floats(-1.5, 1.5, allow_nan=False))
    def test_scalar_and_vector_agree(self, x):
        assert codec.encode_scalar(x) == int(codec.encode(x))


class TestCoarseFine:
    def test_worked(self):
        assert tuple(map(int, split_coarse_fine(738, 32))) == (23, 2)
        assert tuple(map(int, split_coarse_fine(0, 32))) == (0, 0)

    def test_exhaustive(self):
        i = np.arange(1024)
        c, f = split_coarse_fine(i, 32)
        np.testing.assert_array_equal(combine_coarse_fine(c, f, 32), i)
        assert c.max() == 31 and f.max() == 31

    def test_out_of_range(self):
        with pytest.raises(CodecError):
            split_coarse_fine(1024, 32)
