"""Tests for aggregation functions, profile enumeration and constraint sets."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oaccomp.errors import CombinatorialBlowup, DimensionMismatch, InvalidParam, NonSymmetricFunction
from oaccomp.function_model import (
    AggregationFunction,
    ConstraintSet,
    FunctionKind,
    InputProfile,
    QuantizedAlphabet,
    build_constraints,
    enumerate_profiles,
    num_profiles,
    superimpose,
    superimposed_points,
    values_equal,
)

BUILTIN = ["sum", "product", "max", "arithmetic_mean", "geometric_mean"]


def _profiles(name, K, q, offset=0.0):
    return enumerate_profiles(AggregationFunction.from_name(name), K, QuantizedAlphabet.uniform(q, offset))


class TestAggregationFunction:
    """Evaluation and symmetry of the built-in functions."""

    def test_values(self):
        assert AggregationFunction.from_name("sum")([1, 2, 3]) == 6
        assert AggregationFunction.from_name("product")([2, 3]) == 6
        assert AggregationFunction.from_name("max")([0, 3, 1]) == 3
        assert AggregationFunction.from_name("arithmetic_mean")([1, 2]) == 1.5
        assert AggregationFunction.from_name("geometric_mean")([2, 8]) == pytest.approx(4.0)

    def test_geometric_mean_with_zero_level(self):
        assert AggregationFunction.from_name("geometric_mean")([0, 5, 7]) == 0.0

    def test_unknown_name(self):
        with pytest.raises(InvalidParam):
            AggregationFunction.from_name("median")

    def test_custom_requires_callable(self):
        with pytest.raises(InvalidParam):
            AggregationFunction(FunctionKind.CUSTOM)

    def test_inner_and_outer_maps(self):
        f = AggregationFunction(FunctionKind.SUM, inner_map=lambda v: v * v, outer_map=math.sqrt)
        assert f([3, 4]) == 5.0

    def test_non_symmetric_custom_rejected(self):
        f = AggregationFunction(FunctionKind.CUSTOM, custom=lambda v: v[0], symmetric=False)
        with pytest.raises(NonSymmetricFunction):
            enumerate_profiles(f, 2, QuantizedAlphabet.uniform(2))

    @given(st.sampled_from(BUILTIN), st.lists(st.integers(0, 7), min_size=1, max_size=6), st.randoms())
    def test_permutation_invariance(self, name, inputs, rnd):
        f = AggregationFunction.from_name(name)
        perm = list(inputs)
        rnd.shuffle(perm)
        assert f(perm) == f(inputs)


class TestQuantizedAlphabet:
    """Level vectors."""

    def test_uniform(self):
        assert QuantizedAlphabet.uniform(4).levels == (0.0, 1.0, 2.0, 3.0)
        assert QuantizedAlphabet.uniform(3, offset=1).levels == (1.0, 2.0, 3.0)

    def test_levels_must_increase(self):
        with pytest.raises(InvalidParam):
            QuantizedAlphabet((0.0, 2.0, 1.0))


class TestEnumerateProfiles:
    """Multiset enumeration."""

    def test_sum_k2_q2(self):
        prof = _profiles("sum", 2, 2)
        assert [p.value for p in prof] == [0, 1, 2]

    def test_max_k2_q2(self):
        prof = _profiles("max", 2, 2)
        assert [p.value for p in prof] == [0, 1, 1]

    def test_sum_k2_q4_multiset(self):
        prof = _profiles("sum", 2, 4)
        assert len(prof) == 10
        brute = sorted({tuple(sorted(t)): sum(t) for t in itertools.product(range(4), repeat=2)}.values())
        assert sorted(p.value for p in prof) == brute == [0, 1, 2, 2, 3, 3, 4, 4, 5, 6]

    def test_sum_k3_q3_count(self):
        assert len(_profiles("sum", 3, 3)) == 10 == math.comb(5, 2)

    def test_lexicographic_order(self):
        prof = _profiles("sum", 2, 3)
        assert [p.counts for p in prof] == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]

    def test_blowup_cap(self):
        with pytest.raises(CombinatorialBlowup):
            enumerate_profiles(AggregationFunction.from_name("sum"), 12, QuantizedAlphabet.uniform(16), cap=1000)

    def test_bad_sizes(self):
        with pytest.raises(InvalidParam):
            _profiles("sum", 0, 3)
        with pytest.raises(InvalidParam):
            enumerate_profiles(AggregationFunction.from_name("sum"), 2, QuantizedAlphabet((0.0,)))

    @given(st.integers(1, 4), st.integers(2, 5), st.sampled_from(BUILTIN))
    @settings(max_examples=30, deadline=None)
    def test_count_and_conservation(self, K, q, name):
        prof = _profiles(name, K, q, offset=1.0)
        assert len(prof) == num_profiles(K, q)
        assert all(sum(p.counts) == K and min(p.counts) >= 0 for p in prof)

    @given(st.integers(1, 3), st.integers(2, 4), st.sampled_from(BUILTIN))
    @settings(max_examples=25, deadline=None)
    def test_values_match_any_ordering(self, K, q, name):
        f = AggregationFunction.from_name(name)
        alpha = QuantizedAlphabet.uniform(q, 1.0)
        for p in enumerate_profiles(f, K, alpha):
            inputs = [alpha.levels[l] for l in p.node_levels()]
            for perm in itertools.permutations(inputs):
                assert f(list(perm)) == p.value

    @given(
        st.integers(1, 3),
        st.integers(2, 4),
        st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=4, max_size=4),
    )
    @settings(max_examples=30, deadline=None)
    def test_completeness_against_tuples(self, K, q, xs):
        x = np.array(xs[:q])
        prof = _profiles("sum", K, q)
        via_profiles = {complex(np.round(r, 9)) for r in superimposed_points(x, prof)}
        brute = {complex(np.round(sum(x[l] for l in t), 9)) for t in itertools.product(range(q), repeat=K)}
        assert via_profiles == brute


class TestBuildConstraints:
    """Constraint pairs."""

    def test_sum_k2_q2(self):
        assert len(build_constraints(_profiles("sum", 2, 2))) == 3

    def test_max_k2_q2(self):
        cs = build_constraints(_profiles("max", 2, 2))
        assert len(cs) == 2
        assert sorted(cs.gap.tolist()) == [1.0, 1.0]

    def test_constant_function(self):
        prof = [InputProfile((2, 0), 7.0), InputProfile((1, 1), 7.0), InputProfile((0, 2), 7.0)]
        assert len(build_constraints(prof)) == 0

    def test_mixed_shapes_rejected(self):
        with pytest.raises(DimensionMismatch):
            build_constraints([InputProfile((2, 0), 0.0), InputProfile((1, 1, 0), 1.0)])

    @given(st.integers(1, 4), st.integers(2, 4), st.sampled_from(BUILTIN))
    @settings(max_examples=30, deadline=None)
    def test_soundness(self, K, q, name):
        prof = _profiles(name, K, q, offset=1.0)
        cs = build_constraints(prof)
        assert np.all(cs.gap > 0)
        assert np.all(np.any(cs.b != 0, axis=1))
        assert np.all(cs.i < cs.j)
        paired = set(zip(cs.i.tolist(), cs.j.tolist()))
        for i, j in itertools.combinations(range(len(prof)), 2):
            if (i, j) not in paired:
                assert values_equal(prof[i].value, prof[j].value)

    def test_json_roundtrip(self):
        cs = build_constraints(_profiles("max", 3, 3), "max")
        data = cs.to_json()
        assert set(data) >= {"K", "q", "profiles", "pairs"}
        back = ConstraintSet.from_json(data)
        np.testing.assert_array_equal(back.b, cs.b)
        np.testing.assert_array_equal(back.gap, cs.gap)


class TestSuperimpose:
    """Noise-free superposition."""

    def test_bpsk_points(self):
        assert superimpose([-1, 1], [2, 0]) == -2
        assert superimpose([-1, 1], [1, 1]) == 0

    def test_zero_counts(self):
        assert superimpose([0.3 + 1j, -2], [0, 0]) == 0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            superimpose([1, 2, 3], [1, 1])
