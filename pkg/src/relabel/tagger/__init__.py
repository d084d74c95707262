"""Linear-chain CRF tagger: features, inference, training, serialization."""

from .features import (
    CAPACITIES,
    FEATURE_SPACE,
    STUDENT,
    TEACHER,
    extract_features,
    features_for_words,
)
from .model import (
    ModelWeights,
    load_model,
    model_fingerprint,
    model_to_bytes,
    predict_corpus,
    save_model,
    token_log_scores,
    token_marginals,
    viterbi_decode,
    zero_weights,
)
from .train import (
    NonFiniteLoss,
    TrainConfig,
    corpus_nll,
    log_likelihood_and_gradient,
    train,
)

__all__ = [
    "CAPACITIES",
    "FEATURE_SPACE",
    "STUDENT",
    "TEACHER",
    "extract_features",
    "features_for_words",
    "ModelWeights",
    "load_model",
    "model_fingerprint",
    "model_to_bytes",
    "predict_corpus",
    "save_model",
    "token_log_scores",
    "token_marginals",
    "viterbi_decode",
    "zero_weights",
    "NonFiniteLoss",
    "TrainConfig",
    "corpus_nll",
    "log_likelihood_and_gradient",
    "train",
]
