"""Data model and I/O for BIO-tagged corpora.

The on-disk format is two-column CoNLL: one ``token<TAB>tag`` line per token,
a blank line between utterances, and optional ``# key = value`` comment lines
in front of a block (``id``, ``revision``, ``source``).  The writer emits tabs;
the parser also accepts a single space as the column separator.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

from .errors import DataError

SPLITS = ("train", "dev", "test", "unlabeled")
SOURCES = ("original", "reannotated", "pseudo_labeled")

STRICT = "strict"
REPAIR = "repair"

OUTSIDE = "O"


class UnknownLabel(DataError):
    pass


class RaggedLine(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class BioViolation(DataError):
    """An I-X tag not preceded by B-X or I-X of the same type."""

    def __init__(self, message: str, position: int):
        super().__init__(message)
        self.position = position


class DuplicateUtteranceId(DataError):
    pass


@dataclass(frozen=True)
class TagSet:
    """Ordered entity types plus the derived BIO label inventory.

    Label order is fixed: index 0 is ``O``, followed by ``B-X, I-X`` for each
    entity type in order.  All label indices elsewhere in the package refer to
    this ordering.
    """

    entity_types: tuple[str, ...]
    labels: tuple[str, ...] = field(init=False, compare=False)

    def __post_init__(self):
        types = tuple(self.entity_types)
        if len(set(types)) != len(types):
            raise DataError(f"duplicate entity types in {types}")
        for t in types:
            if not t or any(c.isspace() for c in t):
                raise DataError(f"bad entity type name: {t!r}")
        labels = [OUTSIDE]
        for t in types:
            labels.append(f"B-{t}")
            labels.append(f"I-{t}")
        object.__setattr__(self, "entity_types", types)
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabel(f"label {label!r} not in tag set {self.labels}") from None

    def is_inside(self, index: int) -> bool:
        return self.labels[index].startswith("I-")

    def is_begin(self, index: int) -> bool:
        return self.labels[index].startswith("B-")

    def entity_type_of(self, index: int) -> str | None:
        """Entity type of a label index, or None for O."""
        if index == 0:
            return None
        return self.labels[index][2:]

    def begin_index(self, entity_type: str) -> int:
        return self.index(f"B-{entity_type}")

    def inside_index(self, entity_type: str) -> int:
        return self.index(f"I-{entity_type}")


DEFAULT_TAG_SET = TagSet(("PER", "PROD", "ORG", "GPE"))


@dataclass(frozen=True)
class Token:
    text: str
    index: int

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise DataError(f"bad token text: {self.text!r}")
        if self.index < 0:
            raise DataError(f"negative token index: {self.index}")


@dataclass(frozen=True)
class Utterance:
    """A tokenized sentence with gold label indices and revision provenance."""

    id: str
    tokens: tuple[Token, ...]
    gold_tags: tuple[int, ...]
    revision: int = 0
    source: str = "original"

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "gold_tags", tuple(self.gold_tags))
        if len(self.tokens) != len(self.gold_tags):
            raise DataError(
                f"utterance {self.id}: {len(self.tokens)} tokens vs "
                f"{len(self.gold_tags)} tags"
            )
        if not self.tokens:
            raise DataError(f"utterance {self.id}: empty")
        for pos, tok in enumerate(self.tokens):
            if tok.index != pos:
                raise DataError(f"utterance {self.id}: token index {tok.index} at {pos}")
        if self.revision < 0:
            raise DataError(f"utterance {self.id}: negative revision")
        if self.source not in SOURCES:
            raise DataError(f"utterance {self.id}: unknown source {self.source!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)


@dataclass(frozen=True)
class EntitySpan:
    """A maximal entity run: token range [start, end) of one type."""

    entity_type: str
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise DataError(f"bad span bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class Corpus:
    tag_set: TagSet
    utterances: tuple[Utterance, ...]
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        if self.split not in SPLITS:
            raise DataError(f"unknown split {self.split!r}")
        by_id: dict[str, Utterance] = {}
        for utt in self.utterances:
            if utt.id in by_id:
                raise DuplicateUtteranceId(f"duplicate utterance id {utt.id!r}")
            by_id[utt.id] = utt
            for tag in utt.gold_tags:
                if not (0 <= tag < len(self.tag_set)):
                    raise DataError(f"utterance {utt.id}: tag index {tag} out of range")
            if self.split == "unlabeled" and any(t != 0 for t in utt.gold_tags):
                raise DataError(f"unlabeled utterance {utt.id} carries non-O tags")
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self._by_id

    def get(self, utterance_id: str) -> Utterance:
        try:
            return self._by_id[utterance_id]
        except KeyError:
            raise KeyError(f"no utterance {utterance_id!r} in corpus") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(u.id for u in self.utterances)

    def with_utterances(self, utterances: Iterable[Utterance]) -> "Corpus":
        return dataclasses.replace(self, utterances=tuple(utterances))


def make_utterance(
    uid: str,
    words: Sequence[str],
    tags: Sequence[int],
    revision: int = 0,
    source: str = "original",
) -> Utterance:
    """Build an Utterance from plain word strings."""
    tokens = tuple(Token(w, i) for i, w in enumerate(words))
    return Utterance(uid, tokens, tuple(tags), revision=revision, source=source)


def validate_bio(
    utterance: Utterance, tag_set: TagSet, mode: str = REPAIR
) -> Utterance:
    """Check (strict) or fix (repair) orphaned I-X tags.

    strict raises BioViolation at the first I-X whose predecessor is not
    B-X/I-X of the same type; repair rewrites such tags to B-X.  Repair is
    idempotent and leaves the revision untouched.
    """
    if mode not in (STRICT, REPAIR):
        raise ValueError(f"unknown validation mode {mode!r}")
    tags = list(utterance.gold_tags)
    changed = False
    for pos, tag in enumerate(tags):
        if not tag_set.is_inside(tag):
            continue
        etype = tag_set.entity_type_of(tag)
        prev = tags[pos - 1] if pos > 0 else None
        ok = prev is not None and tag_set.entity_type_of(prev) == etype and prev != 0
        if ok:
            continue
        if mode == STRICT:
            raise BioViolation(
                f"utterance {utterance.id}: I-{etype} at position {pos} "
                f"does not continue a {etype} span",
                position=pos,
            )
        tags[pos] = tag_set.begin_index(etype)
        changed = True
    if not changed:
        return utterance
    return dataclasses.replace(utterance, gold_tags=tuple(tags))


def extract_spans(utterance: Utterance, tag_set: TagSet) -> list[EntitySpan]:
    """Maximal B-X (I-X)* runs as spans, sorted by start.

    Input is expected to be BIO-valid; an orphaned I-X is tolerated and
    treated as a span start, matching repair semantics.
    """
    return tags_to_spans(utterance.gold_tags, tag_set)


def tags_to_spans(tags: Sequence[int], tag_set: TagSet) -> list[EntitySpan]:
    spans: list[EntitySpan] = []
    start = None
    current = None
    for pos, tag in enumerate(tags):
        etype = tag_set.entity_type_of(tag)
        begins = tag_set.is_begin(tag)
        if start is not None and (etype != current or begins or etype is None):
            spans.append(EntitySpan(current, start, pos))
            start, current = None, None
        if etype is not None and start is None:
            start, current = pos, etype
    if start is not None:
        spans.append(EntitySpan(current, start, len(tags)))
    return spans


def spans_to_tags(
    spans: Iterable[EntitySpan], length: int, tag_set: TagSet
) -> tuple[int, ...]:
    """Render disjoint spans back to a BIO tag sequence."""
    tags = [0] * length
    for span in spans:
        if span.end > length:
            raise DataError(f"span {span} exceeds length {length}")
        tags[span.start] = tag_set.begin_index(span.entity_type)
        inside = tag_set.inside_index(span.entity_type)
        for pos in range(span.start + 1, span.end):
            tags[pos] = inside
    return tuple(tags)


_COMMENT_KEYS = ("id", "revision", "source")


def parse_conll(
    stream: Iterable[str],
    tag_set: TagSet,
    mode: str = REPAIR,
    split: str = "train",
) -> Corpus:
    """Parse two-column CoNLL text into a Corpus.

    Utterance ids come from ``# id = ...`` comments when present, otherwise
    they are assigned as ``u{n}`` with n counting utterances from 0.  Raises
    a positioned error on malformed lines and EmptyCorpus when the stream
    holds no utterances.
    """
    utterances: list[Utterance] = []
    words: list[str] = []
    tags: list[int] = []
    meta: dict[str, str] = {}
    block_start_line = 0

    def flush(lineno: int):
        nonlocal words, tags, meta
        if not words:
            meta = {}
            return
        uid = meta.get("id", f"u{len(utterances)}")
        try:
            revision = int(meta.get("revision", "0"))
        except ValueError:
            raise DataError(f"utterance {uid}: bad revision {meta['revision']!r}") from None
        source = meta.get("source", "original")
        utt = make_utterance(uid, words, tags, revision=revision, source=source)
        try:
            utt = validate_bio(utt, tag_set, mode=mode)
        except BioViolation as exc:
            raise BioViolation(
                f"line {block_start_line + exc.position}: {exc}", exc.position
            ) from None
        utterances.append(utt)
        words, tags, meta = [], [], {}

    lineno = 0
    for raw in stream:
        lineno += 1
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush(lineno)
            continue
        if line == "#" or line.startswith("# "):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key, value = key.strip(), value.strip()
                if key in _COMMENT_KEYS:
                    meta[key] = value
            continue
        if not words:
            block_start_line = lineno
        fields = line.split("\t") if "\t" in line else line.split(" ")
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise RaggedLine(f"line {lineno}: expected 2 columns, got {line!r}")
        try:
            tag = tag_set.index(fields[1])
        except UnknownLabel:
            raise UnknownLabel(f"line {lineno}: unknown label {fields[1]!r}") from None
        words.append(fields[0])
        tags.append(tag)
    flush(lineno + 1)

    if not utterances:
        raise EmptyCorpus("stream contains no utterances")
    return Corpus(tag_set=tag_set, utterances=tuple(utterances), split=split)


def write_conll(corpus: Corpus, stream: TextIO) -> None:
    """Write a corpus so that parse_conll reproduces tokens, tags, and ids."""
    labels = corpus.tag_set.labels
    for utt in corpus.utterances:
        stream.write(f"# id = {utt.id}\n")
        if utt.revision:
            stream.write(f"# revision = {utt.revision}\n")
        if utt.source != "original":
            stream.write(f"# source = {utt.source}\n")
        for token, tag in zip(utt.tokens, utt.gold_tags):
            stream.write(f"{token.text}\t{labels[tag]}\n")
        stream.write("\n")


def load_conll(
    path, tag_set: TagSet, mode: str = REPAIR, split: str = "train"
) -> Corpus:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_conll(handle, tag_set, mode=mode, split=split)


def save_conll(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        write_conll(corpus, handle)
