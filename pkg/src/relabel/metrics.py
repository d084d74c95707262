"""Entity-level evaluation: exact span+type matching, micro-averaged overall.

A predicted span counts as a true positive only when its (type, start, end)
triple appears in the gold annotation of the same utterance; there is no
partial credit.  Precision and recall are reported as percentages, with the
0/0 case defined as 0 so empty prediction sets still yield a report.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus, extract_spans
from .errors import DataError


class MisalignedCorpora(DataError):
    """pred and gold do not cover the same utterances and token counts."""


@dataclass(frozen=True)
class TypeCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0


def _rates(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = 100.0 * tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


@dataclass(frozen=True)
class EvalReport:
    """Per-type and micro-averaged precision/recall/F1, as percentages."""

    per_type: dict[str, tuple[float, float, float]]
    overall: tuple[float, float, float]
    counts: dict[str, TypeCounts]

    def f1(self, entity_type: str | None = None) -> float:
        if entity_type is None:
            return self.overall[2]
        return self.per_type[entity_type][2]

    def to_table(self) -> str:
        """Tab-separated table, one row per type plus overall."""
        lines = ["type\tprecision\trecall\tf1\ttp\tfp\tfn"]
        rows = [(t, self.per_type[t], self.counts[t]) for t in sorted(self.per_type)]
        total = TypeCounts(
            sum(c.tp for c in self.counts.values()),
            sum(c.fp for c in self.counts.values()),
            sum(c.fn for c in self.counts.values()),
        )
        rows.append(("overall", self.overall, total))
        for name, (precision, recall, f1), c in rows:
            lines.append(
                f"{name}\t{precision:.2f}\t{recall:.2f}\t{f1:.2f}"
                f"\t{c.tp}\t{c.fp}\t{c.fn}"
            )
        return "\n".join(lines) + "\n"


def entity_f1(pred: Corpus, gold: Corpus) -> EvalReport:
    """Score predicted spans against gold spans, aligned by utterance id."""
    if set(pred.ids()) != set(gold.ids()):
        raise MisalignedCorpora(
            f"prediction covers {len(pred)} utterances, gold {len(gold)}, "
            "and the id sets differ"
        )
    tag_set = gold.tag_set
    raw = {etype: [0, 0, 0] for etype in tag_set.entity_types}
    for gold_utt in gold:
        pred_utt = pred.get(gold_utt.id)
        if len(pred_utt) != len(gold_utt):
            raise MisalignedCorpora(
                f"utterance {gold_utt.id}: {len(pred_utt)} predicted tokens "
                f"vs {len(gold_utt)} gold tokens"
            )
        gold_spans = set(extract_spans(gold_utt, tag_set))
        pred_spans = set(extract_spans(pred_utt, tag_set))
        for span in pred_spans & gold_spans:
            raw[span.entity_type][0] += 1
        for span in pred_spans - gold_spans:
            raw[span.entity_type][1] += 1
        for span in gold_spans - pred_spans:
            raw[span.entity_type][2] += 1
    counts = {etype: TypeCounts(*vals) for etype, vals in raw.items()}
    per_type = {etype: _rates(c.tp, c.fp, c.fn) for etype, c in counts.items()}
    overall = _rates(
        sum(c.tp for c in counts.values()),
        sum(c.fp for c in counts.values()),
        sum(c.fn for c in counts.values()),
    )
    return EvalReport(per_type=per_type, overall=overall, counts=counts)
