import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochsim.errors import DomainError
from stochsim.hmm import SymbolSequence, is_unifilar, sequence_probability, summarize
from stochsim.processes import gap_histogram, renewal_classical, renewal_quantum
from stochsim.quantum import (
    divergence_density,
    from_unifilar,
    kraus_defect,
    memory_entropy,
    mps_normalize,
    sample_quantum,
    steady_coherent_state,
    steady_state_quantum,
)


class TestRenewalClassical:
    def test_period_two(self):
        T = renewal_classical(2).T
        assert T[0, 1, 0] == 0.5 and T[1, 0, 0] == 0.5 and T[1, 0, 1] == 1.0
        assert np.count_nonzero(T) == 3

    @pytest.mark.parametrize("N", [2, 3, 7, 32])
    def test_columns_and_unifilar(self, N):
        T = renewal_classical(N)
        assert np.allclose(T.T.sum(axis=(0, 1)), 1)
        assert is_unifilar(T)
        assert np.count_nonzero(T.T[0]) == N - 1 and np.count_nonzero(T.T[1]) == N

    def test_gap_law_by_enumeration(self):
        # probability that a one is followed by exactly g zeros and then a one
        N = 4
        T = renewal_classical(N)
        pi = summarize(T).pi
        p1 = sequence_probability(T, pi, [1])
        for g in range(N + 2):
            p = sequence_probability(T, pi, [1] + [0] * g + [1]) / p1
            assert np.isclose(p, 1 / N if g < N else 0)

    @pytest.mark.parametrize("N", [1, 0, 2.5])
    def test_bad_period(self, N):
        with pytest.raises(ValueError):
            renewal_classical(N)
        with pytest.raises(ValueError):
            renewal_quantum(N)

    def test_metadata(self):
        assert renewal_classical(6).meta == {"process": "renewal", "N": 6}


class TestRenewalQuantum:
    @pytest.mark.parametrize("N", [2, 5, 64])
    def test_kraus_exact(self, N):
        assert kraus_defect(renewal_quantum(N)) < 1e-15

    @pytest.mark.parametrize("N", range(2, 9))
    def test_same_process_as_classical(self, N):
        K1 = mps_normalize(from_unifilar(renewal_classical(N)))
        assert divergence_density(renewal_quantum(N), K1) <= 1e-9

    @pytest.mark.parametrize("N", range(2, 9))
    def test_sequence_probabilities_agree(self, N):
        T = renewal_classical(N)
        pi = summarize(T).pi
        K = renewal_quantum(N).K
        rho0 = steady_state_quantum(K)
        for L in range(1, 9):
            for word in itertools.product((0, 1), repeat=L):
                r = rho0
                for x in word:
                    r = K[x] @ r @ K[x].conj().T
                assert abs(np.trace(r).real - sequence_probability(T, pi, word)) <= 1e-10

    def test_entropy(self):
        assert abs(memory_entropy(renewal_quantum(32)) - 1.23) <= 0.02


class TestGapHistogram:
    def test_examples(self):
        assert gap_histogram([1, 1, 1]) == {0: 2}
        assert gap_histogram([1, 0, 0, 1, 0, 1]) == {1: 1, 2: 1}

    def test_open_ends_dropped(self):
        assert gap_histogram([0, 0, 1, 0, 1, 0, 0, 0]) == {1: 1}
        assert gap_histogram([0, 0, 0]) == {}

    def test_non_binary(self):
        with pytest.raises(DomainError):
            gap_histogram(SymbolSequence(np.array([0, 1, 2]), 3))
        with pytest.raises(DomainError):
            gap_histogram([0, 2, 1])

    @given(st.lists(st.integers(0, 1), max_size=200))
    def test_counts_add_up(self, seq):
        h = gap_histogram(seq)
        ones = sum(seq)
        assert sum(h.values()) == max(ones - 1, 0)
        if ones >= 2:
            first, last = seq.index(1), len(seq) - 1 - seq[::-1].index(1)
            assert sum(g * c for g, c in h.items()) == last - first + 1 - ones

    def test_flat_law_small(self):
        N = 16
        K = renewal_quantum(N)
        h = gap_histogram(sample_quantum(K, steady_coherent_state(K), 2 * 10**5, seed=13))
        n = sum(h.values())
        p = 1 / N
        assert set(h) == set(range(N))
        assert all(abs(c - n * p) <= 5 * np.sqrt(n * p * (1 - p)) for c in h.values())
