"""Mini-batch gradient-ascent training for the linear-chain tagger.

The objective is the mean conditional log-likelihood of the gold tag
sequences, optionally shrunk by per-batch weight decay (the ``l2`` knob,
equivalent to an (l2/2)||w||^2 penalty).  The gradient is the classic
observed-minus-expected feature count, with expectations from
forward-backward.  Steps are scaled per coordinate by the inverse root of
the accumulated squared gradient (adagrad), so rare indicator features --
individual word identities especially -- move quickly while frequent
context features settle.  Everything is deterministic given the config
seed: one generator drives the per-epoch shuffles and no reduction order
depends on hashing or threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..corpus import Corpus, TagSet, Utterance
from ..errors import DataError
from . import inference
from .features import TEACHER, check_capacity, features_for_words
from .model import FEATURE_SPACE, ModelWeights, zero_weights

logger = logging.getLogger(__name__)


class NonFiniteLoss(RuntimeError):
    """Training diverged; usually the learning rate is too high."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 0.1
    l2: float = 0.0
    max_sequence_length: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.max_sequence_length < 1:
            raise ValueError("max_sequence_length must be positive")


class _Seq(NamedTuple):
    """One prepared training sequence: hashed features plus gold tags."""

    ids: np.ndarray      # concatenated feature ids, all positions
    offsets: np.ndarray  # start of each position's slice in ids
    counts: np.ndarray   # features per position
    gold: np.ndarray     # gold label indices


def _prepare(
    utterances: Sequence[Utterance],
    tag_set: TagSet,
    capacity: str,
    max_len: int,
) -> list[_Seq]:
    allowed = inference.transition_mask(tag_set)
    seqs = []
    for utt in utterances:
        words = utt.texts
        gold = np.asarray(utt.gold_tags, dtype=np.int64)
        if len(words) > max_len:
            logger.warning(
                "utterance %s truncated from %d to %d tokens",
                utt.id, len(words), max_len,
            )
            words = words[:max_len]
            gold = gold[:max_len]
        if tag_set.is_inside(int(gold[0])) or (
            len(gold) > 1 and not np.all(allowed[gold[:-1], gold[1:]])
        ):
            raise DataError(
                f"utterance {utt.id}: gold tags break BIO structure; "
                "run repair validation before training"
            )
        feats = features_for_words(words, capacity)
        counts = np.array([len(f) for f in feats], dtype=np.int64)
        offsets = np.zeros(len(feats), dtype=np.int64)
        np.cumsum(counts[:-1], out=offsets[1:])
        seqs.append(_Seq(np.concatenate(feats), offsets, counts, gold))
    return seqs


def _emissions(seq: _Seq, emission: np.ndarray) -> np.ndarray:
    return np.add.reduceat(emission[seq.ids], seq.offsets, axis=0)


def _sequence_stats(
    seq: _Seq,
    emission: np.ndarray,
    transition: np.ndarray,
    start: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log-likelihood and gradient pieces for one sequence.

    Returns (ll, em_delta, tr_delta) where em_delta is (sum counts, L):
    observed minus expected, one row per active feature id in seq.ids order,
    and tr_delta is the (L, L) observed-minus-expected transition count.
    """
    emissions = _emissions(seq, emission)
    n, n_labels = emissions.shape
    gold = seq.gold
    alpha = inference.forward(emissions, transition, start)
    beta = inference.backward(emissions, transition)
    log_z = inference.log_partition(alpha)
    gold_score = inference.path_score(emissions, transition, start, gold)
    ll = gold_score - log_z

    marginals = np.exp(alpha + beta - log_z)
    delta = -marginals
    delta[np.arange(n), gold] += 1.0
    em_delta = np.repeat(delta, seq.counts, axis=0)

    tr_delta = np.zeros((n_labels, n_labels))
    if n > 1:
        log_pair = (
            alpha[:-1, :, None]
            + transition[None, :, :]
            + (emissions[1:] + beta[1:])[:, None, :]
            - log_z
        )
        tr_delta -= np.exp(log_pair).sum(axis=0)
        np.add.at(tr_delta, (gold[:-1], gold[1:]), 1.0)
    return ll, em_delta, tr_delta


def _mean_nll(
    seqs: Sequence[_Seq],
    emission: np.ndarray,
    transition: np.ndarray,
    start: np.ndarray,
) -> float:
    total = 0.0
    for seq in seqs:
        emissions = _emissions(seq, emission)
        alpha = inference.forward(emissions, transition, start)
        gold_score = inference.path_score(emissions, transition, start, seq.gold)
        total += inference.log_partition(alpha) - gold_score
    return total / len(seqs)


def train(
    corpus: Corpus,
    config: TrainConfig,
    capacity: str = TEACHER,
    init_weights: ModelWeights | None = None,
    epoch_callback: Callable[[int, float], None] | None = None,
) -> ModelWeights:
    """Train a tagger on the corpus's gold tags.

    init_weights, when given, seeds the parameters (they are copied, not
    mutated) so a second training stage can continue from a first.
    epoch_callback(epoch_index, mean_nll) is invoked after each epoch with
    the full-corpus mean negative log-likelihood.
    """
    check_capacity(capacity)
    if len(corpus) == 0:
        raise DataError("cannot train on an empty corpus")
    tag_set = corpus.tag_set
    if init_weights is not None:
        if init_weights.tag_set != tag_set:
            raise ValueError("init_weights tag set differs from corpus tag set")
        if init_weights.capacity != capacity:
            raise ValueError(
                f"init_weights capacity {init_weights.capacity!r} != {capacity!r}"
            )
        emission = init_weights.emission.copy()
        transition = init_weights.transition.copy()
    else:
        emission = np.zeros((FEATURE_SPACE, len(tag_set)))
        transition = inference.masked_transitions(tag_set)
    allowed = inference.transition_mask(tag_set)
    start = inference.start_scores(tag_set)

    seqs = _prepare(corpus.utterances, tag_set, capacity, config.max_sequence_length)
    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate
    eps = 1e-8
    em_accum = np.zeros_like(emission)
    tr_accum = np.zeros((len(tag_set), len(tag_set)))

    for epoch in range(config.epochs):
        order = rng.permutation(len(seqs))
        for lo in range(0, len(order), config.batch_size):
            batch = [seqs[i] for i in order[lo : lo + config.batch_size]]
            ll_sum = 0.0
            id_parts, em_parts = [], []
            tr_acc = np.zeros((len(tag_set), len(tag_set)))
            for seq in batch:
                ll, em_delta, tr_delta = _sequence_stats(
                    seq, emission, transition, start
                )
                ll_sum += ll
                id_parts.append(seq.ids)
                em_parts.append(em_delta)
                tr_acc += tr_delta
            if not np.isfinite(ll_sum):
                raise NonFiniteLoss(
                    f"batch log-likelihood became non-finite in epoch {epoch}"
                )
            ids, inverse = np.unique(np.concatenate(id_parts), return_inverse=True)
            grad = np.zeros((len(ids), emission.shape[1]))
            np.add.at(grad, inverse, np.concatenate(em_parts) / len(batch))
            em_accum[ids] += grad * grad
            emission[ids] += lr * grad / (np.sqrt(em_accum[ids]) + eps)
            tr_grad = tr_acc[allowed] / len(batch)
            tr_accum[allowed] += tr_grad * tr_grad
            transition[allowed] += lr * tr_grad / (np.sqrt(tr_accum[allowed]) + eps)
            if config.l2 > 0.0:
                decay = 1.0 - lr * config.l2
                emission *= decay
                transition[allowed] *= decay
        if epoch_callback is not None:
            epoch_callback(epoch, _mean_nll(seqs, emission, transition, start))

    return ModelWeights(
        tag_set=tag_set, capacity=capacity, emission=emission, transition=transition
    )


def corpus_nll(
    weights: ModelWeights,
    corpus: Corpus,
    max_sequence_length: int | None = None,
) -> float:
    """Mean per-utterance negative log-likelihood of the gold tags."""
    if len(corpus) == 0:
        raise DataError("empty corpus")
    max_len = max_sequence_length or max(len(u) for u in corpus)
    seqs = _prepare(corpus.utterances, corpus.tag_set, weights.capacity, max_len)
    start = inference.start_scores(weights.tag_set)
    return _mean_nll(seqs, weights.emission, weights.transition, start)


def log_likelihood_and_gradient(
    weights: ModelWeights, utterances: Sequence[Utterance]
) -> tuple[float, dict[int, np.ndarray], np.ndarray]:
    """Mean log-likelihood and its analytic gradient.

    Returns (ll, emission_grad, transition_grad) where emission_grad maps a
    feature id to its (L,) gradient row and transition_grad is (L, L) with
    zeros at structurally forbidden cells.  Used to cross-check the trainer
    against finite differences.
    """
    tag_set = weights.tag_set
    max_len = max(len(u) for u in utterances)
    seqs = _prepare(utterances, tag_set, weights.capacity, max_len)
    start = inference.start_scores(tag_set)
    ll_sum = 0.0
    em_grad: dict[int, np.ndarray] = {}
    tr_grad = np.zeros((len(tag_set), len(tag_set)))
    for seq in seqs:
        ll, em_delta, tr_delta = _sequence_stats(
            seq, weights.emission, weights.transition, start
        )
        ll_sum += ll
        tr_grad += tr_delta
        for fid, row in zip(seq.ids, em_delta):
            fid = int(fid)
            if fid in em_grad:
                em_grad[fid] = em_grad[fid] + row
            else:
                em_grad[fid] = row.copy()
    scale = 1.0 / len(seqs)
    for fid in em_grad:
        em_grad[fid] *= scale
    return ll_sum * scale, em_grad, tr_grad * scale
