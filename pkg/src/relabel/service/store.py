"""File-backed review queue with an append-only decision log.

The queue file is written once per flagging run and never mutated; every
decision is a line appended (and fsynced) to decisions.jsonl.  Restart
recovery is a pure replay: fold the log over the initial queue in order,
letting the latest timestamp win per utterance.  Queue and meta files carry
no wall-clock data, so rerunning a seeded pipeline reproduces them byte for
byte.

One lock serializes writers; readers see immutable item snapshots and never
block.
"""

from __future__ import annotations

import dataclasses
import json
import os
import threading
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from ..active_loop import (
    FlagConfig,
    GapRecord,
    InvalidTags,
    ReviewDecision,
    UnknownUtterance,
    decision_from_json,
    decision_to_json,
    qualifying_records,
)
from ..corpus import Corpus, EntitySpan, TagSet, make_utterance, validate_bio
from ..errors import DataError

QUEUE_FILE = "queue.jsonl"
META_FILE = "queue_meta.json"
DECISIONS_FILE = "decisions.jsonl"

PENDING = "pending"
DONE = "done"


class Evidence(NamedTuple):
    """Why an utterance was flagged: one disagreeing span and its gap."""

    span: EntitySpan
    p_tag: str
    g_tag: str
    gap: float


@dataclass(frozen=True)
class ReviewItem:
    utterance_id: str
    tokens: tuple[str, ...]
    current_tags: tuple[str, ...]
    evidence: tuple[Evidence, ...]
    decision: ReviewDecision | None = None

    @property
    def status(self) -> str:
        return DONE if self.decision is not None else PENDING

    @property
    def max_gap(self) -> float:
        return max((e.gap for e in self.evidence), default=0.0)


def _evidence_to_json(evidence: Evidence) -> dict:
    return {
        "span": {
            "entity_type": evidence.span.entity_type,
            "start": evidence.span.start,
            "end": evidence.span.end,
        },
        "p_tag": evidence.p_tag,
        "g_tag": evidence.g_tag,
        "gap": evidence.gap,
    }


def _evidence_from_json(payload: dict) -> Evidence:
    span = payload["span"]
    return Evidence(
        span=EntitySpan(span["entity_type"], span["start"], span["end"]),
        p_tag=payload["p_tag"],
        g_tag=payload["g_tag"],
        gap=payload["gap"],
    )


def review_item_to_json(item: ReviewItem) -> dict:
    return {
        "utterance_id": item.utterance_id,
        "tokens": list(item.tokens),
        "current_tags": list(item.current_tags),
        "evidence": [_evidence_to_json(e) for e in item.evidence],
        "status": item.status,
        "decision": None if item.decision is None
        else decision_to_json(item.decision),
    }


def _dump_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


class QueueStore:
    """Review state for one flagging run, persisted in a directory."""

    def __init__(self, directory):
        self.directory = str(directory)
        self._queue_path = os.path.join(self.directory, QUEUE_FILE)
        self._meta_path = os.path.join(self.directory, META_FILE)
        self._decisions_path = os.path.join(self.directory, DECISIONS_FILE)
        self._lock = threading.Lock()
        with open(self._meta_path, "r", encoding="utf-8") as handle:
            meta = json.load(handle)
        self.tag_set = TagSet(tuple(meta["entity_types"]))
        self.train_size = int(meta["train_size"])
        self._order: list[str] = []
        self._items: dict[str, ReviewItem] = {}
        with open(self._queue_path, "r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                row = json.loads(line)
                item = ReviewItem(
                    utterance_id=row["utterance_id"],
                    tokens=tuple(row["tokens"]),
                    current_tags=tuple(row["current_tags"]),
                    evidence=tuple(
                        _evidence_from_json(e) for e in row["evidence"]
                    ),
                )
                if item.utterance_id in self._items:
                    raise DataError(
                        f"queue file repeats utterance {item.utterance_id!r}"
                    )
                self._order.append(item.utterance_id)
                self._items[item.utterance_id] = item
        self._log: list[ReviewDecision] = []
        if os.path.exists(self._decisions_path):
            with open(self._decisions_path, "r", encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        self._replay(decision_from_json(json.loads(line)))

    @classmethod
    def create(
        cls,
        directory,
        corpus: Corpus,
        records: Sequence[GapRecord],
        selected: Sequence[str],
        flag_cfg: FlagConfig,
        train_size: int | None = None,
    ) -> "QueueStore":
        """Write a fresh queue for the selected utterances and open it.

        Evidence per item is the qualifying records that got it flagged,
        worst gap first.  An existing decision log is left in place; stale
        entries for utterances no longer queued are ignored on replay.
        """
        os.makedirs(directory, exist_ok=True)
        labels = corpus.tag_set.labels
        by_utterance: dict[str, list[GapRecord]] = {}
        for record in qualifying_records(records, flag_cfg):
            by_utterance.setdefault(record.utterance_id, []).append(record)
        queue_lines = []
        for uid in selected:
            utt = corpus.get(uid)
            evidence = sorted(
                by_utterance.get(uid, []),
                key=lambda r: (-r.gap, r.span.start, r.span.end, r.span.entity_type),
            )
            queue_lines.append(_dump_line({
                "utterance_id": uid,
                "tokens": list(utt.texts),
                "current_tags": [labels[t] for t in utt.gold_tags],
                "evidence": [
                    _evidence_to_json(Evidence(r.span, r.p_tag, r.g_tag, r.gap))
                    for r in evidence
                ],
            }))
        meta = {
            "entity_types": list(corpus.tag_set.entity_types),
            "train_size": len(corpus) if train_size is None else train_size,
        }
        with open(os.path.join(directory, QUEUE_FILE), "w", encoding="utf-8") as handle:
            handle.writelines(queue_lines)
        with open(os.path.join(directory, META_FILE), "w", encoding="utf-8") as handle:
            handle.write(_dump_line(meta))
        return cls(directory)

    def _replay(self, decision: ReviewDecision) -> ReviewItem | None:
        """Fold one log entry into the snapshot; latest timestamp wins."""
        self._log.append(decision)
        item = self._items.get(decision.utterance_id)
        if item is None:
            return None
        current = item.decision
        if current is None or decision.timestamp >= current.timestamp:
            item = dataclasses.replace(item, decision=decision)
            self._items[decision.utterance_id] = item
        return self._items[decision.utterance_id]

    def _validate(self, item: ReviewItem, decision: ReviewDecision) -> None:
        if decision.verdict != "corrected":
            return
        if len(decision.new_tags) != len(item.tokens):
            raise InvalidTags(
                f"utterance {item.utterance_id}: {len(decision.new_tags)} tags "
                f"for {len(item.tokens)} tokens"
            )
        try:
            indices = [self.tag_set.index(lab) for lab in decision.new_tags]
            candidate = make_utterance(item.utterance_id, item.tokens, indices)
            validate_bio(candidate, self.tag_set, mode="strict")
        except DataError as exc:
            raise InvalidTags(f"utterance {item.utterance_id}: {exc}") from None

    def record_decision(self, decision: ReviewDecision) -> ReviewItem:
        """Validate, append to the log (fsync), and fold into the snapshot.

        An exact duplicate of the item's current decision (same annotator,
        verdict, and tags) is acknowledged without growing the log.
        """
        with self._lock:
            item = self._items.get(decision.utterance_id)
            if item is None:
                raise UnknownUtterance(
                    f"no queued utterance {decision.utterance_id!r}"
                )
            self._validate(item, decision)
            current = item.decision
            if current is not None and (
                current.annotator_id, current.verdict, current.new_tags
            ) == (decision.annotator_id, decision.verdict, decision.new_tags):
                return item
            with open(self._decisions_path, "a", encoding="utf-8") as handle:
                handle.write(_dump_line(decision_to_json(decision)))
                handle.flush()
                os.fsync(handle.fileno())
            return self._replay(decision)

    def get(self, utterance_id: str) -> ReviewItem:
        try:
            return self._items[utterance_id]
        except KeyError:
            raise UnknownUtterance(f"no queued utterance {utterance_id!r}") from None

    def items(self, status: str | None = None) -> list[ReviewItem]:
        """Queued items in max-gap order, optionally filtered by status."""
        rows = [self._items[uid] for uid in self._order]
        if status is None:
            return rows
        return [item for item in rows if item.status == status]

    def decision_log(self) -> tuple[ReviewDecision, ...]:
        return tuple(self._log)

    def stats(self) -> dict:
        rows = self.items()
        done = [item for item in rows if item.decision is not None]
        return {
            "pending": len(rows) - len(done),
            "done": len(done),
            "corrected": sum(
                1 for item in done if item.decision.verdict == "corrected"
            ),
            "accepted": sum(
                1 for item in done if item.decision.verdict == "correct_as_is"
            ),
            "flag_fraction_of_train": len(rows) / self.train_size,
        }
