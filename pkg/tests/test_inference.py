"""Forward-backward and Viterbi checked against exhaustive path enumeration.

The oracle sums over every tag sequence with plain Python floats, so any
dynamic-programming mistake in the package shows up as a mismatch.
"""

import itertools
import math

import numpy as np
import pytest

from relabel.corpus import DEFAULT_TAG_SET, TagSet, make_utterance, validate_bio
from relabel.tagger import inference
from relabel.tagger.features import features_for_words
from relabel.tagger.model import (
    token_log_scores,
    token_marginals,
    viterbi_decode,
    zero_weights,
)

NEG_INF = float("-inf")


def oracle_path_score(emissions, transitions, start, path):
    score = start[path[0]]
    for t, label in enumerate(path):
        score += emissions[t, label]
    for t in range(1, len(path)):
        score += transitions[path[t - 1], path[t]]
    return score


def oracle_marginals(emissions, transitions, start):
    """Brute-force marginals and log-partition over all label sequences."""
    n, n_labels = emissions.shape
    totals = np.zeros((n, n_labels))
    z = 0.0
    for path in itertools.product(range(n_labels), repeat=n):
        score = oracle_path_score(emissions, transitions, start, path)
        weight = 0.0 if score == NEG_INF else math.exp(score)
        z += weight
        for t, label in enumerate(path):
            totals[t, label] += weight
    return totals / z, math.log(z)


def oracle_viterbi(emissions, transitions, start):
    n, n_labels = emissions.shape
    best_path, best_score = None, NEG_INF
    for path in itertools.product(range(n_labels), repeat=n):
        score = oracle_path_score(emissions, transitions, start, path)
        if score > best_score:
            best_path, best_score = path, score
    return list(best_path), best_score


def random_instance(rng, n, n_labels, masked=False):
    emissions = rng.uniform(-2, 2, size=(n, n_labels))
    transitions = rng.uniform(-2, 2, size=(n_labels, n_labels))
    start = np.zeros(n_labels)
    if masked:
        forbid = rng.random(size=transitions.shape) < 0.2
        forbid[:, 0] = False
        transitions[forbid] = NEG_INF
        start_forbid = rng.random(size=n_labels) < 0.2
        start_forbid[0] = False
        start[start_forbid] = NEG_INF
    return emissions, transitions, start


class TestMarginalsAgainstEnumeration:
    def test_random_draws_match_oracle(self):
        rng = np.random.default_rng(20240811)
        for trial in range(100):
            n = int(rng.integers(1, 5))
            n_labels = int(rng.integers(2, 5))
            emissions, transitions, start = random_instance(
                rng, n, n_labels, masked=trial % 2 == 1
            )
            expected, expected_log_z = oracle_marginals(emissions, transitions, start)
            log_marg, _, _, log_z = inference.log_marginals(
                emissions, transitions, start
            )
            assert abs(log_z - expected_log_z) < 1e-9
            np.testing.assert_allclose(
                np.exp(log_marg), expected, rtol=0, atol=1e-9
            )

    def test_single_token_two_labels(self):
        emissions = np.array([[1.0, 0.0]])
        transitions = np.zeros((2, 2))
        start = np.zeros(2)
        log_marg, _, _, _ = inference.log_marginals(emissions, transitions, start)
        expected = math.e / (math.e + 1.0)
        assert abs(math.exp(log_marg[0, 0]) - expected) < 1e-12

    def test_zero_weights_uniform(self):
        emissions = np.zeros((3, 4))
        transitions = np.zeros((4, 4))
        start = np.zeros(4)
        log_marg, _, _, _ = inference.log_marginals(emissions, transitions, start)
        np.testing.assert_allclose(np.exp(log_marg), 0.25, atol=1e-12)

    def test_zero_weights_path_counting_under_masks(self):
        """Marginal = valid paths through the cell / total valid paths."""
        tag_set = TagSet(("ORG",))
        transitions = inference.masked_transitions(tag_set)
        start = inference.start_scores(tag_set)
        n, n_labels = 3, len(tag_set)
        emissions = np.zeros((n, n_labels))
        counts = np.zeros((n, n_labels))
        total = 0
        for path in itertools.product(range(n_labels), repeat=n):
            if oracle_path_score(emissions, transitions, start, path) == NEG_INF:
                continue
            total += 1
            for t, label in enumerate(path):
                counts[t, label] += 1
        log_marg, _, _, _ = inference.log_marginals(emissions, transitions, start)
        np.testing.assert_allclose(np.exp(log_marg), counts / total, atol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            emissions, transitions, start = random_instance(rng, 6, 5, masked=True)
            log_marg, _, _, _ = inference.log_marginals(emissions, transitions, start)
            np.testing.assert_allclose(
                np.exp(log_marg).sum(axis=1), 1.0, rtol=0, atol=1e-9
            )

    def test_forbidden_cells_exactly_zero(self):
        tag_set = DEFAULT_TAG_SET
        transitions = inference.masked_transitions(tag_set)
        start = inference.start_scores(tag_set)
        emissions = np.zeros((1, len(tag_set)))
        log_marg, _, _, _ = inference.log_marginals(emissions, transitions, start)
        for j in range(len(tag_set)):
            if tag_set.is_inside(j):
                assert log_marg[0, j] == NEG_INF
                assert math.exp(log_marg[0, j]) == 0.0


class TestViterbiAgainstEnumeration:
    def test_random_draws_match_oracle(self):
        rng = np.random.default_rng(20240812)
        for trial in range(100):
            n = int(rng.integers(1, 5))
            n_labels = int(rng.integers(2, 5))
            emissions, transitions, start = random_instance(
                rng, n, n_labels, masked=trial % 2 == 1
            )
            expected_tags, expected_score = oracle_viterbi(
                emissions, transitions, start
            )
            tags, score = inference.viterbi(emissions, transitions, start)
            assert list(tags) == expected_tags
            assert abs(score - expected_score) < 1e-9

    def test_one_token_example(self):
        emissions = np.array([[1.0, 0.0]])
        tags, score = inference.viterbi(emissions, np.zeros((2, 2)), np.zeros(2))
        assert list(tags) == [0]
        assert score == 1.0

    def test_two_token_example(self):
        emissions = np.array([[0.0, 1.0], [1.0, 0.0]])
        transitions = np.array([[0.0, 0.0], [0.5, 0.0]])
        tags, score = inference.viterbi(emissions, transitions, np.zeros(2))
        assert list(tags) == [1, 0]
        assert score == 2.5

    def test_all_zero_ties_break_low(self):
        emissions = np.zeros((4, 5))
        tags, score = inference.viterbi(emissions, np.zeros((5, 5)), np.zeros(5))
        assert list(tags) == [0, 0, 0, 0]
        assert score == 0.0

    def test_path_score_matches_oracle(self):
        rng = np.random.default_rng(3)
        emissions, transitions, start = random_instance(rng, 4, 3)
        for path in itertools.product(range(3), repeat=4):
            expected = oracle_path_score(emissions, transitions, start, path)
            got = inference.path_score(
                emissions, transitions, start, np.array(path)
            )
            assert abs(got - expected) < 1e-12


class TestStructuralMasks:
    def test_transition_mask_rules(self):
        tag_set = DEFAULT_TAG_SET
        allowed = inference.transition_mask(tag_set)
        for i, from_label in enumerate(tag_set.labels):
            for j, to_label in enumerate(tag_set.labels):
                if to_label.startswith("I-"):
                    legal = from_label[2:] == to_label[2:] and from_label != "O"
                else:
                    legal = True
                assert allowed[i, j] == legal, (from_label, to_label)

    def test_start_scores_block_inside(self):
        start = inference.start_scores(DEFAULT_TAG_SET)
        for j, label in enumerate(DEFAULT_TAG_SET.labels):
            if label.startswith("I-"):
                assert start[j] == NEG_INF
            else:
                assert start[j] == 0.0

    def test_decoded_sequences_always_bio_valid(self):
        tag_set = DEFAULT_TAG_SET
        rng = np.random.default_rng(99)
        words = ("alpha", "beta", "gamma", "delta", "epsilon")
        for _ in range(25):
            weights = zero_weights(tag_set)
            for ids in features_for_words(words):
                weights.emission[ids] = rng.uniform(-3, 3, size=(len(ids), len(tag_set)))
            allowed = inference.transition_mask(tag_set)
            weights.transition[allowed] = rng.uniform(-3, 3, size=int(allowed.sum()))
            utt = make_utterance("u", list(words), [0] * len(words))
            tags, _ = viterbi_decode(weights, utt)
            decoded = make_utterance("u", list(words), tags)
            assert validate_bio(decoded, tag_set, mode="strict") is decoded


class TestModelLevelMarginals:
    def make_random_model(self, rng, words, tag_set):
        weights = zero_weights(tag_set)
        for ids in features_for_words(words):
            weights.emission[ids] = rng.uniform(-2, 2, size=(len(ids), len(tag_set)))
        allowed = inference.transition_mask(tag_set)
        weights.transition[allowed] = rng.uniform(-2, 2, size=int(allowed.sum()))
        return weights

    def test_marginals_match_oracle_through_model(self):
        tag_set = TagSet(("ORG",))
        rng = np.random.default_rng(41)
        words = ("apex", "labs", "rocks")
        utt = make_utterance("u", list(words), [0, 0, 0])
        for _ in range(10):
            weights = self.make_random_model(rng, words, tag_set)
            from relabel.tagger.model import emission_matrix

            emissions = emission_matrix(weights, words)
            start = inference.start_scores(tag_set)
            expected, _ = oracle_marginals(emissions, weights.transition, start)
            np.testing.assert_allclose(
                token_marginals(weights, utt), expected, rtol=0, atol=1e-9
            )

    def test_log_scores_are_log_of_marginals(self):
        tag_set = DEFAULT_TAG_SET
        rng = np.random.default_rng(42)
        words = ("apex", "labs")
        utt = make_utterance("u", list(words), [0, 0])
        weights = self.make_random_model(rng, words, tag_set)
        logs = token_log_scores(weights, utt)
        margs = token_marginals(weights, utt)
        assert np.array_equal(np.exp(logs), margs)
        np.testing.assert_allclose(np.exp(logs), margs, atol=1e-12)

    def test_marginal_of_certain_cell_is_zero_log(self):
        tag_set = TagSet(("ORG",))
        utt = make_utterance("u", ["x"], [0])
        weights = zero_weights(tag_set)
        ids = features_for_words(("x",))[0]
        weights.emission[ids, 0] = 50.0
        logs = token_log_scores(weights, utt)
        assert abs(logs[0, 0]) < 1e-12
