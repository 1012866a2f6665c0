from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _machines import random_machine
from qpredict.errors import GuardError, ValidationError, ZeroProbabilityError
from qpredict.process import (
    all_words,
    conditional_future,
    load_machine,
    machine_from_rows,
    machine_to_document,
    markov_order,
    past_belief,
    sample_sequence,
    state_morphs,
    stationary_distribution,
    synchronized_state,
    uniform_renewal,
    word_distribution,
    word_probabilities,
)


def golden_mean(p=0.5):
    return machine_from_rows([(0, 0, 0, p), (0, 1, 1, 1 - p), (1, 0, 0, 1.0)], 2, 2)


def coin(p1):
    return machine_from_rows([(0, 0, 0, 1 - p1), (0, 1, 0, p1)], 1, 2)


def brute_word_prob(machine, word):
    # independent oracle: sum over all state paths
    pi = stationary_distribution(machine)
    T = machine.labeled_matrices
    total = 0.0
    for start in range(machine.num_states):
        vec = np.zeros(machine.num_states)
        vec[start] = pi[start]
        for x in word:
            vec = vec @ T[x]
        total += vec.sum()
    return total


class TestRenewal:
    @pytest.mark.parametrize("N", range(1, 8))
    def test_stationary_matches_survival_weights(self, N):
        # pi_k is proportional to the probability that the gap is at least k
        expected = np.array([(N - k) / N for k in range(N)])
        expected /= expected.sum()
        assert np.allclose(stationary_distribution(uniform_renewal(N)), expected, atol=1e-12)

    def test_renewal3_values(self):
        m = uniform_renewal(3)
        assert np.allclose(stationary_distribution(m), [1 / 2, 1 / 3, 1 / 6], atol=1e-12)
        dist = word_distribution(m, 3)
        assert dist[(0, 0, 0)] == 0.0
        assert word_distribution(m, 1)[(1,)] == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("N", range(1, 8))
    def test_tick_rate(self, N):
        # mean gap (N-1)/2 zeros, so one tick every (N+1)/2 symbols
        p1 = word_distribution(uniform_renewal(N), 1)[(1,)]
        assert p1 == pytest.approx(2 / (N + 1), abs=1e-12)

    @pytest.mark.parametrize("N", range(1, 8))
    def test_markov_order(self, N):
        assert markov_order(uniform_renewal(N), 16) == N - 1

    def test_order_above_cap(self):
        assert markov_order(uniform_renewal(5), 2) is None
        assert markov_order(uniform_renewal(5), 6) == 4

    def test_rejects_bad_N(self):
        with pytest.raises(ValidationError):
            uniform_renewal(0)


class TestValidation:
    def test_unnormalized_row(self):
        with pytest.raises(ValidationError, match="state 0"):
            machine_from_rows([(0, 0, 0, 0.5), (0, 1, 0, 0.4)], 1, 2)

    def test_tolerates_rounding(self):
        m = machine_from_rows([(0, 0, 0, 0.5 + 5e-10), (0, 1, 0, 0.5)], 1, 2)
        assert m.labeled_matrices.sum() == pytest.approx(1.0, abs=1e-15)

    def test_non_unifilar(self):
        with pytest.raises(ValidationError, match="non-unifilar"):
            machine_from_rows([(0, 0, 0, 0.5), (0, 0, 1, 0.5), (1, 0, 0, 1.0)], 2, 1)

    def test_symbol_out_of_range(self):
        with pytest.raises(ValidationError):
            machine_from_rows([(0, 2, 0, 1.0)], 1, 2)

    def test_reducible(self):
        with pytest.raises(ValidationError, match="irreducible"):
            machine_from_rows([(0, 0, 1, 1.0), (1, 0, 1, 1.0)], 2, 1)

    def test_malformed_document(self):
        with pytest.raises(ValidationError):
            load_machine({"alphabet_size": 2, "states": ["a"]})
        with pytest.raises(ValidationError):
            load_machine({"alphabet_size": 2, "states": ["a"], "transitions": [{"from": 0}]})

    def test_document_round_trip(self):
        m = uniform_renewal(4)
        again = load_machine(machine_to_document(m))
        assert again == m
        assert np.array_equal(again.labeled_matrices, m.labeled_matrices)


class TestWords:
    def test_lexicographic_order(self):
        assert all_words(2, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_guard(self):
        with pytest.raises(GuardError):
            all_words(2, 21)
        with pytest.raises(GuardError):
            word_probabilities(uniform_renewal(2), 21)

    def test_against_path_sum_oracle(self):
        m = uniform_renewal(4)
        for w, p in word_distribution(m, 4).items():
            assert p == pytest.approx(brute_word_prob(m, w), abs=1e-14)

    def test_conditional_future_is_ratio(self):
        m = uniform_renewal(3)
        joint = word_distribution(m, 4)
        past = (1, 0)
        cond = conditional_future(m, past, 2)
        p_past = word_distribution(m, 2)[past]
        for fut, p in cond.items():
            assert p == pytest.approx(joint[past + fut] / p_past, abs=1e-14)

    def test_zero_probability_past(self):
        with pytest.raises(ZeroProbabilityError):
            past_belief(uniform_renewal(3), (0, 0, 0))

    def test_synchronization(self):
        m = uniform_renewal(3)
        assert synchronized_state(m, (1,)) == 0
        assert synchronized_state(m, (1, 0)) == 1
        assert synchronized_state(m, (0, 0)) == 2
        assert synchronized_state(m, (0,)) is None

    def test_golden_mean_and_coin_orders(self):
        assert markov_order(golden_mean(), 5) == 1
        assert markov_order(coin(0.3), 5) == 0


class TestSampling:
    def test_deterministic(self):
        m = uniform_renewal(3)
        assert np.array_equal(sample_sequence(m, 1000, 7), sample_sequence(m, 1000, 7))
        assert not np.array_equal(sample_sequence(m, 1000, 7), sample_sequence(m, 1000, 8))

    def test_forbidden_words_never_appear(self):
        seq = sample_sequence(uniform_renewal(3), 20_000, 1)
        text = "".join(map(str, seq))
        assert "000" not in text

    def test_frequencies(self):
        m = uniform_renewal(3)
        seq = sample_sequence(m, 100_000, 3)
        # 2-word frequencies within 5 standard errors of the exact values
        pairs = np.bincount(seq[:-1] * 2 + seq[1:], minlength=4) / (len(seq) - 1)
        exact = word_probabilities(m, 2)
        assert np.all(np.abs(pairs - exact) < 5 * np.sqrt(exact * (1 - exact) / len(seq)) + 1e-12)

    def test_empty(self):
        assert sample_sequence(uniform_renewal(2), 0, 0).size == 0


machine_args = st.tuples(
    st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 3)
)


@settings(max_examples=60, deadline=None)
@given(machine_args)
def test_stationary_is_fixed_point(args):
    seed, n, a = args
    m = random_machine(np.random.default_rng(seed), n, a)
    pi = stationary_distribution(m)
    assert np.allclose(pi @ m.transition_matrix, pi, atol=1e-12)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pi > 0)


@settings(max_examples=60, deadline=None)
@given(machine_args, st.integers(1, 4))
def test_word_marginals_consistent(args, k):
    seed, n, a = args
    m = random_machine(np.random.default_rng(seed), n, a)
    longer = word_probabilities(m, k + 1).reshape(-1, a)
    shorter = word_probabilities(m, k)
    # summing out the last symbol or the first one both give the k-word law
    assert np.allclose(longer.sum(axis=1), shorter, atol=1e-13)
    assert np.allclose(word_probabilities(m, k + 1).reshape(a, -1).sum(axis=0), shorter, atol=1e-13)
    assert np.allclose(state_morphs(m, k).sum(axis=1), 1.0, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(machine_args)
def test_markov_order_synchronizes_every_word(args):
    seed, n, a = args
    m = random_machine(np.random.default_rng(seed), n, a)
    kappa = markov_order(m, 6)
    if kappa is None:
        return
    probs = word_probabilities(m, kappa)
    for w, p in zip(itertools.product(range(a), repeat=kappa), probs):
        if p > 0:
            assert synchronized_state(m, w) is not None
