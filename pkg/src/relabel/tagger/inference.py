"""Log-space forward-backward and Viterbi over explicit score matrices.

All functions take an emission matrix ``(n, L)``, a transition matrix
``(L, L)``, and an additive start vector ``(L,)``.  Structural constraints
are expressed as -inf entries; the recursions use ``np.logaddexp`` so -inf
propagates without NaNs.  A path's score is the sum of its emission scores,
its transition scores, and the start score of its first label.
"""

from __future__ import annotations

import numpy as np

from ..corpus import TagSet

NEG_INF = float("-inf")


def transition_mask(tag_set: TagSet) -> np.ndarray:
    """Boolean (L, L) matrix, True where a transition is structurally allowed.

    The only forbidden moves are into I-Y from a label that is not B-Y or
    I-Y: such a move would start an entity mid-span.
    """
    n = len(tag_set)
    allowed = np.ones((n, n), dtype=bool)
    for j in range(n):
        if not tag_set.is_inside(j):
            continue
        etype = tag_set.entity_type_of(j)
        for i in range(n):
            if tag_set.entity_type_of(i) != etype or i == 0:
                allowed[i, j] = False
    return allowed


def start_scores(tag_set: TagSet) -> np.ndarray:
    """Additive start vector: 0 for O and B-X, -inf for I-X.

    A sequence may not open with an inside tag, so decoded output is always
    structurally valid from the first token on.
    """
    scores = np.zeros(len(tag_set))
    for j in range(len(tag_set)):
        if tag_set.is_inside(j):
            scores[j] = NEG_INF
    return scores


def masked_transitions(tag_set: TagSet) -> np.ndarray:
    """Zero transition matrix with -inf at structurally forbidden cells."""
    trans = np.zeros((len(tag_set), len(tag_set)))
    trans[~transition_mask(tag_set)] = NEG_INF
    return trans


def forward(emissions: np.ndarray, transitions: np.ndarray,
            start: np.ndarray) -> np.ndarray:
    """Log-alpha matrix (n, L): alpha[t, j] = logsumexp over prefixes ending at j."""
    n, n_labels = emissions.shape
    alpha = np.empty((n, n_labels))
    alpha[0] = start + emissions[0]
    for t in range(1, n):
        scores = alpha[t - 1][:, None] + transitions
        alpha[t] = emissions[t] + np.logaddexp.reduce(scores, axis=0)
    return alpha


def backward(emissions: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    """Log-beta matrix (n, L): beta[t, i] = logsumexp over suffixes from i."""
    n, n_labels = emissions.shape
    beta = np.empty((n, n_labels))
    beta[n - 1] = 0.0
    for t in range(n - 2, -1, -1):
        scores = transitions + (emissions[t + 1] + beta[t + 1])[None, :]
        beta[t] = np.logaddexp.reduce(scores, axis=1)
    return beta


def log_partition(alpha: np.ndarray) -> float:
    return float(np.logaddexp.reduce(alpha[-1]))


def log_marginals(
    emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Per-token log-marginals plus the alpha/beta/logZ used to build them."""
    alpha = forward(emissions, transitions, start)
    beta = backward(emissions, transitions)
    log_z = log_partition(alpha)
    return alpha + beta - log_z, alpha, beta, log_z


def viterbi(
    emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray
) -> tuple[np.ndarray, float]:
    """Best tag sequence and its unnormalized log-score.

    Ties break toward the lower label index at every step, including the
    final one (argmax returns the first maximum).
    """
    n, n_labels = emissions.shape
    best = start + emissions[0]
    pointers = np.empty((n, n_labels), dtype=np.int64)
    for t in range(1, n):
        scores = best[:, None] + transitions
        pointers[t] = np.argmax(scores, axis=0)
        best = emissions[t] + np.max(scores, axis=0)
    tags = np.empty(n, dtype=np.int64)
    tags[n - 1] = int(np.argmax(best))
    for t in range(n - 1, 0, -1):
        tags[t - 1] = pointers[t, tags[t]]
    return tags, float(best[tags[n - 1]])


def path_score(
    emissions: np.ndarray,
    transitions: np.ndarray,
    start: np.ndarray,
    tags: np.ndarray,
) -> float:
    """Unnormalized log-score of one tag sequence."""
    n = emissions.shape[0]
    score = start[tags[0]] + emissions[np.arange(n), tags].sum()
    if n > 1:
        score = score + transitions[tags[:-1], tags[1:]].sum()
    return float(score)
