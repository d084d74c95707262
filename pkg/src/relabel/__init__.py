"""Annotation-error mining and repair for BIO-tagged corpora.

The pipeline: train k fold models on a corpus's own folds, score every
predicted entity span against the gold tags under it, queue the worst
disagreements for human review, merge the verdicts back in, and distill a
compact student from the repaired data plus teacher pseudo-labels.
"""

from .active_loop import (
    FlagConfig,
    FoldPlan,
    GapRecord,
    LoopConfig,
    ReviewDecision,
    flag_utterances,
    make_folds,
    merge_reannotations,
    score_gaps,
    select_for_reannotation,
)
from .corpus import (
    Corpus,
    DEFAULT_TAG_SET,
    EntitySpan,
    TagSet,
    Utterance,
    load_conll,
    save_conll,
)
from .distill import PseudoLabeledSet, pseudo_label, two_stage_train
from .errors import DataError
from .metrics import EvalReport, entity_f1
from .noise_lab import (
    ConfusionRule,
    CorruptionLedger,
    NoiseSpec,
    evaluate_detection,
    f1_recovery_experiment,
    inject_noise,
)
from .tagger import (
    ModelWeights,
    TrainConfig,
    load_model,
    model_fingerprint,
    predict_corpus,
    save_model,
    token_marginals,
    train,
    viterbi_decode,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "ConfusionRule",
    "CorruptionLedger",
    "DEFAULT_TAG_SET",
    "DataError",
    "EntitySpan",
    "EvalReport",
    "FlagConfig",
    "FoldPlan",
    "GapRecord",
    "LoopConfig",
    "ModelWeights",
    "NoiseSpec",
    "PseudoLabeledSet",
    "ReviewDecision",
    "TagSet",
    "TrainConfig",
    "Utterance",
    "entity_f1",
    "evaluate_detection",
    "f1_recovery_experiment",
    "flag_utterances",
    "inject_noise",
    "load_conll",
    "load_model",
    "make_folds",
    "merge_reannotations",
    "model_fingerprint",
    "predict_corpus",
    "pseudo_label",
    "save_conll",
    "save_model",
    "score_gaps",
    "select_for_reannotation",
    "token_marginals",
    "train",
    "two_stage_train",
    "viterbi_decode",
]
