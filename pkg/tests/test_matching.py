"""
Tests de la similarité cosinus, du glouton et de l'oracle hongrois
"""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.matching import (
    CandidatePairSet,
    cosine_similarity,
    greedy_match,
    hungarian_match,
    similarity_matrix,
)
from src.utils import ConfigError, DataError


def brute_force_total(matrix: np.ndarray) -> float:
    n = matrix.shape[0]
    return max(
        math.fsum(matrix[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    )


class TestCosine:
    def test_identical(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_arithmetic(self):
        assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974631846, abs=1e-9)

    def test_zero_vector(self):
        assert cosine_similarity([0, 0], [1, 2]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            cosine_similarity([1, 2], [1, 2, 3])

    def test_matrix_matches_pairwise(self, rng):
        A = rng.standard_normal((3, 5))
        B = rng.standard_normal((3, 4))
        S = similarity_matrix(A, B)
        for i in range(5):
            for j in range(4):
                assert S[i, j] == pytest.approx(cosine_similarity(A[:, i], B[:, j]), abs=1e-12)

    @seed(3)
    @settings(max_examples=100, deadline=None)
    @given(
        a=arrays(np.float64, (4,), elements=st.integers(-1000, 1000).map(float)),
        b=arrays(np.float64, (4,), elements=st.integers(-1000, 1000).map(float)),
    )
    def test_symmetric_and_bounded(self, a, b):
        value = cosine_similarity(a, b)
        assert -1.0 <= value <= 1.0
        assert value == pytest.approx(cosine_similarity(b, a), abs=1e-12)


class TestGreedyMatch:
    def test_singleton(self):
        result = greedy_match(CandidatePairSet.complete(np.array([[1.0]])))
        assert result.matched_pairs == ((0, 0),)
        assert result.total_similarity == 1.0

    def test_greedy_is_not_optimal(self):
        result = greedy_match(CandidatePairSet.complete(np.array([[0.9, 0.8], [0.8, 0.1]])))
        assert result.matched_pairs == ((0, 0), (1, 1))
        assert result.total_similarity == pytest.approx(1.0)

    def test_tie_break(self):
        result = greedy_match(CandidatePairSet.complete(np.full((3, 3), 0.5)))
        assert result.matched_pairs == ((0, 0), (1, 1), (2, 2))

    def test_empty(self):
        result = greedy_match(CandidatePairSet(np.empty((0, 2)), np.empty(0), 0, 0))
        assert len(result) == 0
        assert result.total_similarity == 0.0

    def test_sparse_candidates_leave_unmatched(self):
        s = CandidatePairSet([(0, 0), (1, 0)], [0.9, 0.8], 2, 2)
        result = greedy_match(s)
        assert result.matched_pairs == ((0, 0),)
        assert result.unmatched_a == (1,)

    def test_deterministic(self, rng):
        matrix = rng.uniform(-1, 1, (8, 8))
        s = CandidatePairSet.complete(matrix)
        assert greedy_match(s) == greedy_match(s)

    def test_half_approximation(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            matrix = rng.uniform(-1.0, 1.0, (n, n))
            shifted = CandidatePairSet.complete(1.0 + matrix)
            greedy = greedy_match(shifted).total_similarity
            optimal = hungarian_match(shifted).total_similarity
            assert greedy >= 0.5 * optimal - 1e-12
            assert greedy <= optimal + 1e-12

    def test_bijection_on_complete_instance(self, rng):
        result = greedy_match(CandidatePairSet.complete(rng.uniform(-1, 1, (10, 10))))
        mapping = result.mapping(10)
        assert sorted(mapping.tolist()) == list(range(10))


class TestHungarianMatch:
    def test_small_optimum(self):
        result = hungarian_match(CandidatePairSet.complete(np.array([[0.9, 0.8], [0.8, 0.1]])))
        assert sorted(result.matched_pairs) == [(0, 1), (1, 0)]
        assert result.total_similarity == pytest.approx(1.6)

    def test_identity_dominant(self):
        result = hungarian_match(CandidatePairSet.complete(np.eye(4)))
        assert sorted(result.matched_pairs) == [(i, i) for i in range(4)]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for n in range(2, 7):
            matrix = rng.uniform(-1, 1, (n, n))
            result = hungarian_match(CandidatePairSet.complete(matrix))
            assert result.total_similarity == pytest.approx(brute_force_total(matrix), abs=1e-12)

    def test_cap(self):
        with pytest.raises(ConfigError):
            hungarian_match(CandidatePairSet.complete(np.zeros((5, 5))), cap=4)

    def test_incomplete_instance(self):
        with pytest.raises(ConfigError):
            hungarian_match(CandidatePairSet([(0, 0)], [1.0], 2, 2))
