"""Trainer checks: gradient oracle, determinism, convergence behavior."""

import logging

import numpy as np
import pytest

from relabel.corpus import Corpus, DEFAULT_TAG_SET, TagSet, make_utterance
from relabel.errors import DataError
from relabel.synth import SynthConfig, generate_corpus
from relabel.tagger import (
    NonFiniteLoss,
    TrainConfig,
    corpus_nll,
    log_likelihood_and_gradient,
    token_marginals,
    train,
)
from relabel.tagger import inference
from relabel.tagger.features import features_for_words
from relabel.tagger.model import model_to_bytes, zero_weights

VOCAB = ("apex", "labs", "called", "maria", "about", "flexdesk", "toronto", "the")


def random_valid_tags(rng, tag_set, n):
    """Sample a BIO-valid label path uniformly over allowed moves."""
    allowed = inference.transition_mask(tag_set)
    starts = [j for j in range(len(tag_set)) if not tag_set.is_inside(j)]
    tags = [int(rng.choice(starts))]
    for _ in range(n - 1):
        options = np.flatnonzero(allowed[tags[-1]])
        tags.append(int(rng.choice(options)))
    return tags


def random_model(rng, tag_set, words, capacity="teacher"):
    weights = zero_weights(tag_set, capacity)
    for word in sorted(set(words)):
        for ids in features_for_words((word,), capacity):
            weights.emission[ids] = rng.uniform(
                -1, 1, size=(len(ids), len(tag_set))
            )
    allowed = inference.transition_mask(tag_set)
    weights.transition[allowed] = rng.uniform(-1, 1, size=int(allowed.sum()))
    return weights


def central_difference(weights, utt, array, coordinate, step=1e-5):
    array[coordinate] += step
    up = log_likelihood_and_gradient(weights, [utt])[0]
    array[coordinate] -= 2 * step
    down = log_likelihood_and_gradient(weights, [utt])[0]
    array[coordinate] += step
    return (up - down) / (2 * step)


class TestGradientOracle:
    def test_analytic_gradient_matches_central_differences(self):
        """50 random 3-token instances, step 1e-5, relative error <= 1e-4.

        Every active emission coordinate and every allowed transition cell
        is checked; the comparison is the L2 relative error of the full
        gradient vector, which is what finite differences can resolve at
        this step size.
        """
        rng = np.random.default_rng(20240813)
        tag_set = TagSet(("ORG", "PER"))
        allowed_cells = np.argwhere(inference.transition_mask(tag_set))
        for _ in range(50):
            words = [str(w) for w in rng.choice(VOCAB, size=3)]
            tags = random_valid_tags(rng, tag_set, 3)
            utt = make_utterance("u", words, tags)
            weights = random_model(rng, tag_set, words)
            ll, em_grad, tr_grad = log_likelihood_and_gradient(weights, [utt])
            assert np.isfinite(ll)

            analytic, numeric = [], []
            for fid in sorted(em_grad):
                for label in range(len(tag_set)):
                    analytic.append(em_grad[fid][label])
                    numeric.append(
                        central_difference(weights, utt, weights.emission,
                                           (fid, label))
                    )
            for row, col in allowed_cells:
                analytic.append(tr_grad[row, col])
                numeric.append(
                    central_difference(weights, utt, weights.transition,
                                       (row, col))
                )
            analytic = np.array(analytic)
            numeric = np.array(numeric)
            rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
            assert rel <= 1e-4, rel

    def test_gradient_zero_at_optimum_direction(self):
        """At all-zero weights the transition gradient into forbidden cells is 0."""
        tag_set = TagSet(("ORG",))
        utt = make_utterance("u", ["a", "b"], [1, 2])
        weights = zero_weights(tag_set)
        _, _, tr_grad = log_likelihood_and_gradient(weights, [utt])
        allowed = inference.transition_mask(tag_set)
        assert np.all(tr_grad[~allowed] == 0.0)


class TestTraining:
    def small_corpus(self, n=50, seed=5):
        return generate_corpus(SynthConfig(n_utterances=n, seed=seed))

    def test_determinism_bitwise(self):
        corpus = self.small_corpus(30)
        config = TrainConfig(epochs=2, seed=11)
        first = train(corpus, config)
        second = train(corpus, config)
        assert model_to_bytes(first) == model_to_bytes(second)

    def test_all_outside_corpus_saturates_o(self):
        words = [["hello", "there", "friend"], ["pull", "up", "the", "account"]]
        utts = tuple(
            make_utterance(f"u{i}", w, [0] * len(w)) for i, w in enumerate(words * 100)
        )
        corpus = Corpus(DEFAULT_TAG_SET, utts)
        weights = train(corpus, TrainConfig(epochs=5, learning_rate=0.5, seed=1))
        for utt in corpus.utterances[:4]:
            margs = token_marginals(weights, utt)
            assert np.all(margs[:, 0] > 0.99)

    def test_epoch_nll_non_increasing(self):
        corpus = self.small_corpus(50)
        curve = []
        train(
            corpus,
            TrainConfig(epochs=5, seed=3),
            epoch_callback=lambda epoch, nll: curve.append(nll),
        )
        assert len(curve) == 5
        for earlier, later in zip(curve, curve[1:]):
            assert later <= earlier + 1e-6

    def test_training_improves_nll(self):
        corpus = self.small_corpus(40)
        weights = train(corpus, TrainConfig(epochs=5, seed=2))
        trained_nll = corpus_nll(weights, corpus)
        untrained_nll = corpus_nll(zero_weights(corpus.tag_set), corpus)
        assert trained_nll < untrained_nll

    def test_non_finite_loss_raised(self):
        corpus = self.small_corpus(8)
        config = TrainConfig(epochs=2, batch_size=4, learning_rate=1e307, seed=0)
        with np.errstate(all="ignore"), pytest.raises(NonFiniteLoss):
            train(corpus, config)

    def test_truncation_warns_and_trains(self, caplog):
        long_words = [f"w{i}" for i in range(30)]
        utts = (
            make_utterance("long", long_words, [0] * 30),
            make_utterance("short", ["hello"], [0]),
        )
        corpus = Corpus(DEFAULT_TAG_SET, utts)
        with caplog.at_level(logging.WARNING, logger="relabel.tagger.train"):
            train(corpus, TrainConfig(epochs=1, max_sequence_length=10, seed=0))
        assert any("truncated" in rec.message for rec in caplog.records)

    def test_invalid_gold_structure_rejected(self):
        ts = DEFAULT_TAG_SET
        utt = make_utterance("bad", ["a", "b"], [0, ts.index("I-ORG")])
        corpus = Corpus(ts, (utt,))
        with pytest.raises(DataError):
            train(corpus, TrainConfig(epochs=1, seed=0))

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            train(
                Corpus(DEFAULT_TAG_SET, ()), TrainConfig(epochs=1, seed=0)
            )

    def test_init_weights_continue_and_inputs_unchanged(self):
        corpus = self.small_corpus(20)
        config = TrainConfig(epochs=1, seed=7)
        stage_a = train(corpus, config)
        before = model_to_bytes(stage_a)
        stage_b = train(corpus, config, init_weights=stage_a)
        assert model_to_bytes(stage_a) == before
        assert corpus_nll(stage_b, corpus) <= corpus_nll(stage_a, corpus) + 1e-9

    def test_init_weights_capacity_mismatch(self):
        corpus = self.small_corpus(5)
        teacher = train(corpus, TrainConfig(epochs=1, seed=1))
        with pytest.raises(ValueError):
            train(corpus, TrainConfig(epochs=1, seed=1), capacity="student",
                  init_weights=teacher)

    def test_student_capacity_trains(self):
        corpus = self.small_corpus(20)
        weights = train(corpus, TrainConfig(epochs=1, seed=4), capacity="student")
        assert weights.capacity == "student"

    def test_l2_shrinks_weights(self):
        corpus = self.small_corpus(20)
        plain = train(corpus, TrainConfig(epochs=2, seed=6))
        shrunk = train(corpus, TrainConfig(epochs=2, seed=6, l2=0.1))
        norm = lambda w: float(np.abs(w.emission).sum())
        assert norm(shrunk) < norm(plain)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(l2=-1.0)
