"""Teacher-to-student distillation with a gold fine-tuning stage.

A trained teacher decodes an unlabeled pool into pseudo labels (optionally
keeping only utterances it is confident about), a compact student trains on
those, and then the same student continues training on the gold corpus.  The
result is a small model that inherits the teacher's coverage of contexts the
gold set never shows.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .corpus import Corpus, load_conll, save_conll
from .errors import DataError
from .tagger import (
    ModelWeights,
    TrainConfig,
    model_fingerprint,
    token_marginals,
    train,
    viterbi_decode,
)
from .tagger.features import STUDENT, TEACHER


@dataclass(frozen=True)
class PseudoLabeledSet:
    """Teacher-decoded corpus plus the provenance needed to audit it."""

    corpus: Corpus
    teacher_fingerprint: str
    confidence_floor: float


def pseudo_label(
    teacher: ModelWeights, unlabeled: Corpus, confidence_floor: float = 0.7
) -> PseudoLabeledSet:
    """Decode every unlabeled utterance; keep the confidently decoded ones.

    Confidence is the minimum over tokens of the maximum marginal, so one
    uncertain token disqualifies the whole utterance.  A floor of 0 keeps
    everything.  Selection is per-utterance, so corpus order never matters.
    """
    if teacher.capacity != TEACHER:
        raise ValueError(
            f"pseudo-labeling needs a teacher-capacity model, got {teacher.capacity!r}"
        )
    if unlabeled.split != "unlabeled":
        raise DataError(
            f"pseudo-labeling expects the unlabeled split, got {unlabeled.split!r}"
        )
    if not 0 <= confidence_floor:
        raise ValueError("confidence_floor must be non-negative")
    kept = []
    for utt in unlabeled:
        tags, _ = viterbi_decode(teacher, utt)
        if confidence_floor > 0:
            confidence = float(token_marginals(teacher, utt).max(axis=1).min())
            if confidence < confidence_floor:
                continue
        kept.append(
            dataclasses.replace(utt, gold_tags=tuple(tags), source="pseudo_labeled")
        )
    corpus = Corpus(tag_set=unlabeled.tag_set, utterances=tuple(kept), split="train")
    return PseudoLabeledSet(
        corpus=corpus,
        teacher_fingerprint=model_fingerprint(teacher),
        confidence_floor=confidence_floor,
    )


def two_stage_train(
    pseudo: PseudoLabeledSet, gold: Corpus, cfg: TrainConfig
) -> ModelWeights:
    """Train a student on pseudo labels, then continue on gold.

    Stage B restarts the epoch counter but inherits stage-A weights, so with
    an empty pseudo set the result is exactly a plain student trained on
    gold.
    """
    if len(gold) == 0:
        raise DataError("gold corpus is empty")
    if len(pseudo.corpus) == 0:
        return train(gold, cfg, capacity=STUDENT)
    stage_a = train(pseudo.corpus, cfg, capacity=STUDENT)
    return train(gold, cfg, capacity=STUDENT, init_weights=stage_a)


def save_pseudo_labeled(pseudo: PseudoLabeledSet, path) -> None:
    """Write the corpus as CoNLL with a .meta.json provenance sidecar."""
    save_conll(pseudo.corpus, path)
    meta = {
        "confidence_floor": pseudo.confidence_floor,
        "n_utterances": len(pseudo.corpus),
        "teacher_fingerprint": pseudo.teacher_fingerprint,
    }
    with open(f"{path}.meta.json", "w", encoding="utf-8") as handle:
        json.dump(meta, handle, sort_keys=True, indent=2)
        handle.write("\n")


def load_pseudo_labeled(path, tag_set) -> PseudoLabeledSet:
    with open(f"{path}.meta.json", "r", encoding="utf-8") as handle:
        meta = json.load(handle)
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    if text.strip():
        corpus = load_conll(path, tag_set, mode="strict")
    else:
        corpus = Corpus(tag_set=tag_set, utterances=(), split="train")
    return PseudoLabeledSet(
        corpus=corpus,
        teacher_fingerprint=meta["teacher_fingerprint"],
        confidence_floor=meta["confidence_floor"],
    )
