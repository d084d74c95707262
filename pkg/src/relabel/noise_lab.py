"""Controlled label corruption and the experiments built on it.

inject_noise plants known annotation errors (type swaps like ORG->PROD, or
span drops) and records every edit in a ledger, so detection quality and F1
recovery can be scored against ground truth.  f1_recovery_experiment runs
the full story: corrupt, mine disagreements, restore what was flagged, and
train students on clean/corrupted/repaired data to measure how much of the
damage the loop undoes.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .active_loop import LoopConfig, flag_utterances
from .corpus import Corpus, extract_spans, spans_to_tags
from .errors import DataError
from .metrics import EvalReport, entity_f1
from .tagger import STUDENT, TrainConfig, predict_corpus, train


class NoEligibleUtterances(DataError):
    pass


class DegenerateExperiment(DataError):
    """Noise too weak: corruption did not hurt the focus type's F1."""


@dataclass(frozen=True)
class ConfusionRule:
    from_type: str
    to_type: str
    weight: float = 1.0

    def __post_init__(self):
        if self.from_type == self.to_type:
            raise ValueError(f"confusion rule maps {self.from_type} to itself")
        if not self.weight > 0:
            raise ValueError("rule weight must be positive")


DEFAULT_CONFUSION = (ConfusionRule("ORG", "PROD"), ConfusionRule("PROD", "ORG"))


@dataclass(frozen=True)
class NoiseSpec:
    rate: float
    confusion: tuple[ConfusionRule, ...] = DEFAULT_CONFUSION
    drop_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.rate < 1):
            raise ValueError("rate must be in (0, 1)")
        if not self.confusion:
            raise ValueError("need at least one confusion rule")
        if not (0 <= self.drop_prob <= 1):
            raise ValueError("drop_prob must be in [0, 1]")
        object.__setattr__(self, "confusion", tuple(self.confusion))


@dataclass(frozen=True)
class LedgerEntry:
    """One corrupted utterance: tags before and after, and the rule used."""

    original_tags: tuple[str, ...]
    corrupted_tags: tuple[str, ...]
    rule: str


@dataclass(frozen=True)
class CorruptionLedger:
    entries: dict[str, LedgerEntry]

    def corrupted_ids(self) -> frozenset[str]:
        return frozenset(self.entries)

    def restore(self, corpus: Corpus, only: Iterable[str] | None = None) -> Corpus:
        """Rewrite ledgered utterances back to their original tags.

        only, when given, limits restoration to those utterance ids (the
        oracle stand-in for re-annotating just the flagged utterances).
        """
        allow = self.corrupted_ids() if only is None else (
            self.corrupted_ids() & set(only)
        )
        tag_set = corpus.tag_set
        restored = []
        for utt in corpus:
            if utt.id in allow:
                tags = tuple(tag_set.index(lab)
                             for lab in self.entries[utt.id].original_tags)
                utt = dataclasses.replace(utt, gold_tags=tags)
            restored.append(utt)
        return corpus.with_utterances(restored)


def inject_noise(corpus: Corpus, spec: NoiseSpec) -> tuple[Corpus, CorruptionLedger]:
    """Corrupt exactly round(rate * |eligible|) utterances, one span each.

    An utterance is eligible when it holds at least one span of a rule's
    source type.  Within a corrupted utterance one eligible span is chosen
    uniformly; with probability drop_prob it is erased to O, otherwise a
    weighted rule retypes it.  The returned ledger undoes every edit.
    """
    tag_set = corpus.tag_set
    source_types = {rule.from_type for rule in spec.confusion}
    for rule in spec.confusion:
        for etype in (rule.from_type, rule.to_type):
            if etype not in tag_set.entity_types:
                raise DataError(f"confusion rule type {etype!r} not in tag set")

    eligible = [
        utt.id
        for utt in corpus
        if any(s.entity_type in source_types for s in extract_spans(utt, tag_set))
    ]
    if not eligible:
        raise NoEligibleUtterances(
            f"no utterance has a span of type {sorted(source_types)}"
        )
    count = round(spec.rate * len(eligible))
    if count < 1:
        raise NoEligibleUtterances(
            f"rate {spec.rate} of {len(eligible)} eligible utterances rounds to zero"
        )

    rng = random.Random(spec.seed)
    chosen = set(rng.sample(eligible, count))
    labels = tag_set.labels
    entries: dict[str, LedgerEntry] = {}
    corrupted = []
    for utt in corpus:
        if utt.id not in chosen:
            corrupted.append(utt)
            continue
        spans = extract_spans(utt, tag_set)
        candidates = [s for s in spans if s.entity_type in source_types]
        target = candidates[rng.randrange(len(candidates))]
        if rng.random() < spec.drop_prob:
            new_spans = [s for s in spans if s != target]
            rule_name = f"drop:{target.entity_type}"
        else:
            matching = [r for r in spec.confusion if r.from_type == target.entity_type]
            rule = rng.choices(matching, [r.weight for r in matching])[0]
            new_spans = [
                dataclasses.replace(s, entity_type=rule.to_type) if s == target else s
                for s in spans
            ]
            rule_name = f"{rule.from_type}->{rule.to_type}"
        new_tags = spans_to_tags(new_spans, len(utt), tag_set)
        entries[utt.id] = LedgerEntry(
            original_tags=tuple(labels[t] for t in utt.gold_tags),
            corrupted_tags=tuple(labels[t] for t in new_tags),
            rule=rule_name,
        )
        corrupted.append(dataclasses.replace(utt, gold_tags=new_tags))
    return corpus.with_utterances(corrupted), CorruptionLedger(entries)


class DetectionReport(NamedTuple):
    precision: float
    recall: float
    lift: float


def evaluate_detection(
    flagged: Iterable[str], ledger: CorruptionLedger, train_size: int
) -> DetectionReport:
    """Precision/recall of the flagged set against the ledger, plus lift
    over a random sample of the same size."""
    if train_size < 1:
        raise ValueError("train_size must be positive")
    flagged_set = set(flagged)
    corrupted = ledger.corrupted_ids()
    if not flagged_set:
        return DetectionReport(0.0, 0.0, 0.0)
    hits = len(flagged_set & corrupted)
    precision = hits / len(flagged_set)
    recall = hits / len(corrupted)
    base_rate = len(corrupted) / train_size
    return DetectionReport(precision, recall, precision / base_rate)


@dataclass(frozen=True)
class RecoveryReport:
    """Clean vs corrupted vs repaired student evaluations."""

    f1_clean: EvalReport
    f1_corrupted: EvalReport
    f1_repaired: EvalReport
    recovery_fraction: dict[str, float]
    detection: DetectionReport
    flagged: tuple[str, ...]
    n_corrupted: int


def f1_recovery_experiment(
    clean: Corpus,
    spec: NoiseSpec,
    loop_cfg: LoopConfig,
    eval_set: Corpus,
    student_cfg: TrainConfig | None = None,
) -> RecoveryReport:
    """Corrupt, flag, oracle-restore the flagged utterances, compare students.

    recovery_fraction[t] = (f1_repaired - f1_corrupted)/(f1_clean - f1_corrupted)
    per entity type, reported only where the corruption actually cost F1.
    Raises DegenerateExperiment when it cost nothing on every focus type.
    """
    overlap = set(clean.ids()) & set(eval_set.ids())
    if overlap:
        raise DataError(f"eval set shares {len(overlap)} utterance ids with train")
    student_cfg = student_cfg or loop_cfg.train

    corrupted, ledger = inject_noise(clean, spec)
    _, _, selected = flag_utterances(
        corrupted, loop_cfg.flag, loop_cfg.train,
        k=loop_cfg.k, seed=loop_cfg.seed, capacity=loop_cfg.capacity,
    )
    repaired = ledger.restore(corrupted, only=selected)

    reports = {}
    for name, train_corpus in (
        ("clean", clean), ("corrupted", corrupted), ("repaired", repaired)
    ):
        student = train(train_corpus, student_cfg, capacity=STUDENT)
        reports[name] = entity_f1(predict_corpus(student, eval_set), eval_set)

    recovery: dict[str, float] = {}
    for etype in clean.tag_set.entity_types:
        f1_clean = reports["clean"].f1(etype)
        f1_corrupted = reports["corrupted"].f1(etype)
        if f1_clean - f1_corrupted > 1e-9:
            recovery[etype] = (
                (reports["repaired"].f1(etype) - f1_corrupted)
                / (f1_clean - f1_corrupted)
            )
    focus = loop_cfg.flag.focus_types or clean.tag_set.entity_types
    if not any(etype in recovery for etype in focus):
        raise DegenerateExperiment(
            f"corruption did not reduce F1 for any focus type {tuple(focus)}"
        )
    return RecoveryReport(
        f1_clean=reports["clean"],
        f1_corrupted=reports["corrupted"],
        f1_repaired=reports["repaired"],
        recovery_fraction=recovery,
        detection=evaluate_detection(selected, ledger, len(clean)),
        flagged=tuple(selected),
        n_corrupted=len(ledger.entries),
    )


def recovery_table(report: RecoveryReport) -> str:
    """Per-type F1 before/after table with the recovered fraction."""
    lines = ["type\tf1_clean\tf1_corrupted\tf1_repaired\trecovery"]
    types = sorted(report.f1_clean.per_type)
    for etype in types + ["overall"]:
        if etype == "overall":
            clean = report.f1_clean.f1()
            corrupted = report.f1_corrupted.f1()
            repaired = report.f1_repaired.f1()
            recovery = ""
        else:
            clean = report.f1_clean.f1(etype)
            corrupted = report.f1_corrupted.f1(etype)
            repaired = report.f1_repaired.f1(etype)
            value = report.recovery_fraction.get(etype)
            recovery = f"{value:.3f}" if value is not None else "-"
        lines.append(
            f"{etype}\t{clean:.2f}\t{corrupted:.2f}\t{repaired:.2f}\t{recovery}"
        )
    return "\n".join(lines) + "\n"


def write_ledger(ledger: CorruptionLedger, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for uid in sorted(ledger.entries):
            entry = ledger.entries[uid]
            handle.write(json.dumps(
                {
                    "utterance_id": uid,
                    "original_tags": list(entry.original_tags),
                    "corrupted_tags": list(entry.corrupted_tags),
                    "rule": entry.rule,
                },
                sort_keys=True, separators=(",", ":"),
            ))
            handle.write("\n")


def read_ledger(path) -> CorruptionLedger:
    entries = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            row = json.loads(line)
            entries[row["utterance_id"]] = LedgerEntry(
                original_tags=tuple(row["original_tags"]),
                corrupted_tags=tuple(row["corrupted_tags"]),
                rule=row["rule"],
            )
    return CorruptionLedger(entries)
