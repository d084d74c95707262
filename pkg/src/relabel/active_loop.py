"""N-fold disagreement mining and review-decision merging.

The loop: split the training set into k folds, train a model per fold on the
other k-1 folds, predict each fold with its held-out model, and score every
predicted entity span by how confidently the model disagrees with the gold
annotation.  The gap for a span is the max over its tokens of

    log-marginal(predicted tag) - log-marginal(gold tag)

in nats.  Utterances with a span whose gap clears the threshold (strictly)
are queued for human review; merged decisions rewrite tags and bump the
revision counter so provenance survives.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .corpus import (
    Corpus,
    EntitySpan,
    STRICT,
    Utterance,
    tags_to_spans,
    validate_bio,
)
from .errors import DataError
from .tagger import TrainConfig, token_log_scores, train, viterbi_decode
from .tagger.features import TEACHER

VERDICTS = ("correct_as_is", "corrected")


class TooFewUtterances(DataError):
    pass


class UnknownUtterance(DataError):
    pass


class InvalidTags(DataError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic utterance -> fold assignment."""

    k: int
    assignment: dict[str, int]
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return [uid for uid, f in self.assignment.items() if f == fold]


@dataclass(frozen=True)
class FlagConfig:
    """Selection rule for the review queue.

    threshold is in natural-log units: a span is alarming when the model
    finds its own tag e^threshold times likelier than the gold tag.  A raw
    probability difference can never exceed 1, so thresholds above 1 only
    make sense in log space; set use_raw_probabilities for sweep
    experiments on the probability scale.
    """

    threshold: float = 2.0
    focus_types: tuple[str, ...] | None = ("ORG",)
    budget: float | None = None
    use_raw_probabilities: bool = False

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.budget is not None and not (0 < self.budget <= 1):
            raise ValueError("budget must be in (0, 1]")
        if self.focus_types is not None:
            object.__setattr__(self, "focus_types", tuple(self.focus_types))


@dataclass(frozen=True)
class LoopConfig:
    """Everything one disagreement-mining pass needs."""

    k: int = 5
    seed: int = 0
    train: TrainConfig = TrainConfig()
    flag: FlagConfig = FlagConfig()
    capacity: str = TEACHER

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least 2 folds")


@dataclass(frozen=True)
class GapRecord:
    """One predicted entity span scored against the gold tags under it."""

    utterance_id: str
    span: EntitySpan
    p_tag: str
    g_tag: str
    gap: float
    fold: int


@dataclass(frozen=True)
class ReviewDecision:
    utterance_id: str
    verdict: str
    annotator_id: str
    timestamp: float
    new_tags: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise DataError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "corrected" and self.new_tags is None:
            raise DataError(
                f"decision on {self.utterance_id}: corrected requires new_tags"
            )
        if self.new_tags is not None:
            object.__setattr__(self, "new_tags", tuple(self.new_tags))


class FoldPrediction(NamedTuple):
    """Held-out prediction for one utterance."""

    utterance_id: str
    tags: list[int]
    log_scores: np.ndarray


def make_folds(corpus: Corpus, k: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle utterances by seed and deal them round-robin into k folds."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if len(corpus) < k:
        raise TooFewUtterances(f"{len(corpus)} utterances cannot fill {k} folds")
    ids = list(corpus.ids())
    order = np.random.default_rng(seed).permutation(len(ids))
    assignment = {ids[int(pos)]: i % k for i, pos in enumerate(order)}
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def fold_split(corpus: Corpus, plan: FoldPlan, fold: int) -> tuple[Corpus, Corpus]:
    """(training portion, prediction portion) for one fold, in corpus order."""
    if not (0 <= fold < plan.k):
        raise ValueError(f"fold {fold} out of range for k={plan.k}")
    train_part = [u for u in corpus if plan.assignment[u.id] != fold]
    predict_part = [u for u in corpus if plan.assignment[u.id] == fold]
    return corpus.with_utterances(train_part), corpus.with_utterances(predict_part)


def run_fold(
    corpus: Corpus,
    plan: FoldPlan,
    fold: int,
    train_cfg: TrainConfig,
    capacity: str = TEACHER,
) -> list[FoldPrediction]:
    """Train on the fold's complement, predict the fold's own utterances."""
    train_part, predict_part = fold_split(corpus, plan, fold)
    weights = train(train_part, train_cfg, capacity=capacity)
    outputs = []
    for utt in predict_part:
        tags, _ = viterbi_decode(weights, utt)
        outputs.append(FoldPrediction(utt.id, tags, token_log_scores(weights, utt)))
    return outputs


def score_gaps(
    fold_outputs: dict[int, Sequence[FoldPrediction]],
    corpus: Corpus,
    use_raw_probabilities: bool = False,
) -> list[GapRecord]:
    """One GapRecord per predicted entity span, across all folds.

    Spans where the prediction agrees with gold get gap <= 0 and stay in
    the list so thresholds can be swept; selection later ignores them.
    """
    seen: set[str] = set()
    for outputs in fold_outputs.values():
        for out in outputs:
            if out.utterance_id in seen:
                raise DataError(f"utterance {out.utterance_id} predicted twice")
            seen.add(out.utterance_id)
    missing = set(corpus.ids()) - seen
    if missing:
        raise DataError(f"fold outputs miss {len(missing)} utterances")

    tag_set = corpus.tag_set
    records = []
    for fold in sorted(fold_outputs):
        for out in fold_outputs[fold]:
            utt = corpus.get(out.utterance_id)
            scores = out.log_scores
            if use_raw_probabilities:
                scores = np.exp(scores)
            for span in tags_to_spans(out.tags, tag_set):
                best_gap, best_pos = -math.inf, span.start
                for pos in range(span.start, span.end):
                    diff = float(
                        scores[pos, out.tags[pos]] - scores[pos, utt.gold_tags[pos]]
                    )
                    if diff > best_gap:
                        best_gap, best_pos = diff, pos
                records.append(
                    GapRecord(
                        utterance_id=utt.id,
                        span=span,
                        p_tag=tag_set.labels[out.tags[best_pos]],
                        g_tag=tag_set.labels[utt.gold_tags[best_pos]],
                        gap=best_gap,
                        fold=fold,
                    )
                )
    return records


def _eligible(record: GapRecord, cfg: FlagConfig) -> bool:
    if record.gap <= cfg.threshold:
        return False
    return cfg.focus_types is None or record.span.entity_type in cfg.focus_types


def qualifying_records(
    gaps: Sequence[GapRecord], cfg: FlagConfig
) -> list[GapRecord]:
    """Records that clear the threshold strictly and match the focus types."""
    return [record for record in gaps if _eligible(record, cfg)]


def select_for_reannotation(
    gaps: Sequence[GapRecord],
    cfg: FlagConfig,
    train_size: int | None = None,
) -> list[str]:
    """Utterance ids to review, ordered by their worst gap, descending.

    An utterance qualifies when any of its records clears the threshold
    strictly and matches the focus types.  A budget caps the list at
    floor(budget * train_size); ties in gap break by utterance id so the
    output is a total order.
    """
    worst: dict[str, float] = {}
    for record in gaps:
        if not _eligible(record, cfg):
            continue
        current = worst.get(record.utterance_id)
        if current is None or record.gap > current:
            worst[record.utterance_id] = record.gap
    ranked = sorted(worst, key=lambda uid: (-worst[uid], uid))
    if cfg.budget is not None:
        if train_size is None:
            raise ValueError("budget requires train_size")
        ranked = ranked[: int(cfg.budget * train_size)]
    return ranked


def flag_utterances(
    corpus: Corpus,
    flag_cfg: FlagConfig,
    train_cfg: TrainConfig,
    k: int = 5,
    seed: int = 0,
    capacity: str = TEACHER,
) -> tuple[FoldPlan, list[GapRecord], list[str]]:
    """Full mining pass: folds, per-fold models, gap scores, selection."""
    plan = make_folds(corpus, k=k, seed=seed)
    outputs = {
        fold: run_fold(corpus, plan, fold, train_cfg, capacity=capacity)
        for fold in range(k)
    }
    records = score_gaps(
        outputs, corpus, use_raw_probabilities=flag_cfg.use_raw_probabilities
    )
    selected = select_for_reannotation(records, flag_cfg, train_size=len(corpus))
    return plan, records, selected


def merge_reannotations(
    corpus: Corpus, decisions: Sequence[ReviewDecision]
) -> Corpus:
    """Apply review decisions, later timestamps superseding earlier ones.

    corrected replaces the tags, bumps the revision, and marks the source;
    correct_as_is only bumps the revision, recording that a human confirmed
    the annotation.
    """
    tag_set = corpus.tag_set
    merged: dict[str, Utterance] = {}
    for decision in sorted(decisions, key=lambda d: d.timestamp):
        uid = decision.utterance_id
        if uid not in corpus:
            raise UnknownUtterance(f"decision references unknown utterance {uid!r}")
        utt = merged.get(uid, corpus.get(uid))
        if decision.verdict == "corrected":
            if len(decision.new_tags) != len(utt):
                raise InvalidTags(
                    f"utterance {uid}: {len(decision.new_tags)} tags for "
                    f"{len(utt)} tokens"
                )
            try:
                indices = tuple(tag_set.index(lab) for lab in decision.new_tags)
                candidate = dataclasses.replace(
                    utt,
                    gold_tags=indices,
                    revision=utt.revision + 1,
                    source="reannotated",
                )
                validate_bio(candidate, tag_set, mode=STRICT)
            except DataError as exc:
                raise InvalidTags(f"utterance {uid}: {exc}") from None
            merged[uid] = candidate
        else:
            merged[uid] = dataclasses.replace(utt, revision=utt.revision + 1)
    return corpus.with_utterances(
        merged.get(u.id, u) for u in corpus.utterances
    )


def gap_record_to_json(record: GapRecord) -> dict:
    return {
        "utterance_id": record.utterance_id,
        "span": {
            "entity_type": record.span.entity_type,
            "start": record.span.start,
            "end": record.span.end,
        },
        "p_tag": record.p_tag,
        "g_tag": record.g_tag,
        "gap": record.gap,
        "fold": record.fold,
    }


def gap_record_from_json(payload: dict) -> GapRecord:
    span = payload["span"]
    return GapRecord(
        utterance_id=payload["utterance_id"],
        span=EntitySpan(span["entity_type"], span["start"], span["end"]),
        p_tag=payload["p_tag"],
        g_tag=payload["g_tag"],
        gap=payload["gap"],
        fold=payload["fold"],
    )


def decision_to_json(decision: ReviewDecision) -> dict:
    payload = {
        "utterance_id": decision.utterance_id,
        "verdict": decision.verdict,
        "annotator_id": decision.annotator_id,
        "timestamp": decision.timestamp,
    }
    if decision.new_tags is not None:
        payload["new_tags"] = list(decision.new_tags)
    return payload


def decision_from_json(payload: dict) -> ReviewDecision:
    new_tags = payload.get("new_tags")
    return ReviewDecision(
        utterance_id=payload["utterance_id"],
        verdict=payload["verdict"],
        annotator_id=payload["annotator_id"],
        timestamp=payload["timestamp"],
        new_tags=tuple(new_tags) if new_tags is not None else None,
    )


def _write_jsonl(rows: Iterable[dict], stream: TextIO) -> None:
    for row in rows:
        stream.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
        stream.write("\n")


def write_gap_records(records: Sequence[GapRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        _write_jsonl((gap_record_to_json(r) for r in records), handle)


def read_gap_records(path) -> list[GapRecord]:
    with open(path, "r", encoding="utf-8") as handle:
        return [gap_record_from_json(json.loads(line)) for line in handle if line.strip()]


def write_decisions(decisions: Sequence[ReviewDecision], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        _write_jsonl((decision_to_json(d) for d in decisions), handle)


def read_decisions(path) -> list[ReviewDecision]:
    with open(path, "r", encoding="utf-8") as handle:
        return [decision_from_json(json.loads(line)) for line in handle if line.strip()]
