"""Tests for codebooks, decoding and output quantization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oaccomp.channel import NoiseModel, transmit_many
from oaccomp.errors import InvalidParam, OverlapViolation
from oaccomp.function_model import AggregationFunction, InputProfile, QuantizedAlphabet, enumerate_profiles
from oaccomp.receiver import Codebook, build_codebook, decode, decode_many, gaussian_ml_index, quantize_output


def _profiles(name, K, q):
    return enumerate_profiles(AggregationFunction.from_name(name), K, QuantizedAlphabet.uniform(q))


@pytest.fixture
def bpsk_max() -> Codebook:
    return build_codebook([-1, 1], _profiles("max", 2, 2))


class TestBuildCodebook:
    """Merging coincident points."""

    def test_bpsk_max(self, bpsk_max):
        assert bpsk_max.as_dict() == {-2 + 0j: 0.0, 0j: 1.0, 2 + 0j: 1.0}

    def test_pam_sum(self):
        x = np.array([0, 1, 2]) / np.sqrt(5)
        cb = build_codebook(x, _profiles("sum", 2, 3))
        # values 0,1,2,2,3,4: the two value-2 profiles share r = 2/sqrt(5)
        assert len(cb) == 5
        assert sorted(cb.values.tolist()) == [0, 1, 2, 3, 4]
        assert len(cb.profile_point) == 6

    def test_overlap(self):
        with pytest.raises(OverlapViolation):
            build_codebook([0, 1, 2], [InputProfile((1, 0, 1), 2.0), InputProfile((0, 2, 0), 5.0)])

    def test_qpsk_max_overlap(self):
        with pytest.raises(OverlapViolation):
            build_codebook([1, 1j, -1, -1j], _profiles("max", 2, 4))

    def test_deterministic(self):
        x = np.exp(1j * np.arange(4))
        a = build_codebook(x, _profiles("sum", 3, 4))
        b = build_codebook(x, _profiles("sum", 3, 4))
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.values, b.values)

    def test_csv(self, bpsk_max, tmp_path):
        path = tmp_path / "cb.csv"
        bpsk_max.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "re,im,f"
        assert len(lines) == 4


class TestDecode:
    """Nearest-point and Cauchy likelihood decoding."""

    def test_nearest(self, bpsk_max):
        assert decode(bpsk_max, 0.9, NoiseModel.gaussian(1.0)) == (1.0, 1)

    def test_exact_point(self, bpsk_max):
        for k, r in enumerate(bpsk_max.points):
            assert decode(bpsk_max, r, NoiseModel.cauchy(0.3))[1] == k

    def test_tie_goes_to_lowest_index(self, bpsk_max):
        assert decode(bpsk_max, 1.0)[1] == 1
        assert decode(bpsk_max, -1.0)[1] == 0

    def test_cauchy_ml_differs_from_nearest(self):
        # one point close on both axes, another exact on one axis but far on the other
        cb = Codebook(np.array([0.3 + 0.3j, 0.0 + 5.0j]), np.array([0.0, 1.0]), np.array([0, 1]))
        y = 0.0 + 0.0j
        noise = NoiseModel.cauchy(0.02)
        assert decode(cb, y, noise)[1] == 1
        assert decode(cb, y, noise, min_distance=True)[1] == 0

    def test_empty(self):
        with pytest.raises(InvalidParam):
            decode_many(Codebook(np.zeros(0, complex), np.zeros(0), np.zeros(0, int)), [0.0])

    def test_chunking(self):
        rng = np.random.default_rng(0)
        cb = Codebook(rng.standard_normal(6) + 1j * rng.standard_normal(6), np.arange(6.0), np.arange(6))
        y = rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000)
        _, idx = decode_many(cb, y)
        np.testing.assert_array_equal(idx, np.argmin(np.abs(y[:, None] - cb.points[None, :]), axis=1))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_ml_agreement(self, seed):
        rng = np.random.default_rng(seed)
        cb = Codebook(rng.standard_normal(10) + 1j * rng.standard_normal(10), np.arange(10.0), np.arange(10))
        y = 2 * (rng.standard_normal(500) + 1j * rng.standard_normal(500))
        _, idx = decode_many(cb, y)
        np.testing.assert_array_equal(idx, gaussian_ml_index(cb, y, 0.7))

    @pytest.mark.parametrize("name", ["sum", "max", "product"])
    def test_zero_noise_exactness(self, name):
        rng = np.random.default_rng(1)
        prof = _profiles(name, 3, 3)
        # generic complex x separates all multisets with probability one
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        cb = build_codebook(x, prof)
        counts = np.array([p.counts for p in prof])
        y = transmit_many(x, counts, NoiseModel.gaussian(0.0), rng)
        f, _ = decode_many(cb, y)
        np.testing.assert_array_equal(f, [p.value for p in prof])


class TestQuantizeOutput:
    """Nearest output level."""

    def test_rounding(self):
        assert quantize_output(2.4, range(7)) == 2

    def test_exact_level(self):
        assert quantize_output(3.0, range(7)) == 3

    def test_tie_to_smaller(self):
        assert quantize_output(2.5, [2, 3]) == 2

    def test_clamps(self):
        assert quantize_output(-5, [0, 1]) == 0
        assert quantize_output(9, [0, 1]) == 1

    def test_empty(self):
        with pytest.raises(InvalidParam):
            quantize_output(1.0, [])

    @given(st.floats(-10, 10), st.lists(st.floats(-10, 10), min_size=1, max_size=8, unique=True))
    def test_nearest(self, f, levels):
        levels = sorted(levels)
        out = quantize_output(f, levels)
        assert out in levels
        assert abs(out - f) <= min(abs(l - f) for l in levels)
