"""Model container, inference entry points, and binary serialization.

Emission weights are logically a sparse map (feature id, label) -> weight but
are stored as a dense (FEATURE_SPACE, L) array so scoring is a gather plus a
sum.  Weights are immutable after training; every function here only reads
them, so one model may serve many threads.

Serialized format (little-endian throughout)::

    magic   b"RELABELCRF1\\n"
    u32     header length in bytes
    bytes   header: canonical JSON with entity_types, capacity,
            feature_space, n_emission
    f64[L*L]          transition matrix, row-major (-inf entries included)
    u32[n_emission]   emission feature ids
    u8[n_emission]    emission label indices
    f64[n_emission]   emission weights

Only nonzero emission cells are written, in (feature id, label) order, so a
model's byte stream is a pure function of its weights and the fingerprint is
stable across processes and reruns.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from ..corpus import TagSet, Utterance
from ..errors import DataError
from . import inference
from .features import FEATURE_SPACE, check_capacity, features_for_words

MAGIC = b"RELABELCRF1\n"


class ModelFormatError(DataError):
    pass


@dataclass
class ModelWeights:
    """Trained tagger parameters.  Treat as frozen once constructed."""

    tag_set: TagSet
    capacity: str
    emission: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        check_capacity(self.capacity)
        n_labels = len(self.tag_set)
        if self.emission.shape != (FEATURE_SPACE, n_labels):
            raise ValueError(f"bad emission shape {self.emission.shape}")
        if self.transition.shape != (n_labels, n_labels):
            raise ValueError(f"bad transition shape {self.transition.shape}")
        allowed = inference.transition_mask(self.tag_set)
        if not np.all(np.isneginf(self.transition[~allowed])):
            raise ValueError("forbidden transition cells must be -inf")
        if not np.all(np.isfinite(self.transition[allowed])):
            raise ValueError("allowed transition weights must be finite")


def zero_weights(tag_set: TagSet, capacity: str = "teacher") -> ModelWeights:
    """All-zero learnable weights over the structural transition mask."""
    emission = np.zeros((FEATURE_SPACE, len(tag_set)))
    return ModelWeights(
        tag_set=tag_set,
        capacity=capacity,
        emission=emission,
        transition=inference.masked_transitions(tag_set),
    )


def emission_matrix(weights: ModelWeights, words: tuple[str, ...]) -> np.ndarray:
    """Per-token emission scores (n, L): sum of active feature weights."""
    feats = features_for_words(words, weights.capacity)
    rows = [weights.emission[ids].sum(axis=0) for ids in feats]
    return np.stack(rows)


def viterbi_decode(
    weights: ModelWeights, utterance: Utterance
) -> tuple[list[int], float]:
    """Best tag sequence (label indices) and its unnormalized log-score."""
    emissions = emission_matrix(weights, utterance.texts)
    start = inference.start_scores(weights.tag_set)
    tags, score = inference.viterbi(emissions, weights.transition, start)
    return [int(t) for t in tags], score


def token_log_scores(weights: ModelWeights, utterance: Utterance) -> np.ndarray:
    """Log-marginal matrix (n, L); -inf marks structurally impossible cells."""
    emissions = emission_matrix(weights, utterance.texts)
    start = inference.start_scores(weights.tag_set)
    log_marg, _, _, _ = inference.log_marginals(emissions, weights.transition, start)
    return log_marg


def token_marginals(weights: ModelWeights, utterance: Utterance) -> np.ndarray:
    """Row-stochastic marginal matrix (n, L) from forward-backward."""
    return np.exp(token_log_scores(weights, utterance))


def predict_corpus(weights: ModelWeights, corpus):
    """Copy of corpus with every utterance's tags replaced by the decode."""
    if corpus.tag_set != weights.tag_set:
        raise DataError("corpus tag set does not match model tag set")
    decoded = [
        dataclasses.replace(utt, gold_tags=tuple(viterbi_decode(weights, utt)[0]))
        for utt in corpus
    ]
    return corpus.with_utterances(decoded)


def model_to_bytes(weights: ModelWeights) -> bytes:
    fids, labels = np.nonzero(weights.emission)
    values = weights.emission[fids, labels]
    header = json.dumps(
        {
            "entity_types": list(weights.tag_set.entity_types),
            "capacity": weights.capacity,
            "feature_space": FEATURE_SPACE,
            "n_emission": int(fids.size),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", len(header)))
    out.write(header)
    out.write(weights.transition.astype("<f8").tobytes(order="C"))
    out.write(fids.astype("<u4").tobytes())
    out.write(labels.astype("u1").tobytes())
    out.write(values.astype("<f8").tobytes())
    return out.getvalue()


def model_from_bytes(blob: bytes) -> ModelWeights:
    view = memoryview(blob)
    if bytes(view[: len(MAGIC)]) != MAGIC:
        raise ModelFormatError("bad magic; not a model file")
    offset = len(MAGIC)
    (header_len,) = struct.unpack_from("<I", view, offset)
    offset += 4
    try:
        header = json.loads(bytes(view[offset : offset + header_len]))
    except ValueError:
        raise ModelFormatError("unreadable model header") from None
    offset += header_len
    if header.get("feature_space") != FEATURE_SPACE:
        raise ModelFormatError(
            f"model hashed into {header.get('feature_space')} ids, "
            f"this build uses {FEATURE_SPACE}"
        )
    tag_set = TagSet(tuple(header["entity_types"]))
    n_labels = len(tag_set)
    n_emission = header["n_emission"]
    expected = n_labels * n_labels * 8 + n_emission * (4 + 1 + 8)
    if len(blob) - offset != expected:
        raise ModelFormatError("model file truncated or padded")
    transition = np.frombuffer(
        view, dtype="<f8", count=n_labels * n_labels, offset=offset
    ).reshape(n_labels, n_labels).copy()
    offset += n_labels * n_labels * 8
    fids = np.frombuffer(view, dtype="<u4", count=n_emission, offset=offset)
    offset += n_emission * 4
    labels = np.frombuffer(view, dtype="u1", count=n_emission, offset=offset)
    offset += n_emission
    values = np.frombuffer(view, dtype="<f8", count=n_emission, offset=offset)
    emission = np.zeros((FEATURE_SPACE, n_labels))
    emission[fids.astype(np.int64), labels.astype(np.int64)] = values
    return ModelWeights(
        tag_set=tag_set,
        capacity=header["capacity"],
        emission=emission,
        transition=transition,
    )


def model_fingerprint(weights: ModelWeights) -> str:
    """Stable hex digest of the serialized model."""
    return hashlib.blake2b(model_to_bytes(weights), digest_size=16).hexdigest()


def save_model(weights: ModelWeights, path) -> None:
    with open(path, "wb") as handle:
        handle.write(model_to_bytes(weights))


def load_model(path) -> ModelWeights:
    with open(path, "rb") as handle:
        return model_from_bytes(handle.read())
