"""Hashed indicator features for the tagger.

Every feature is a template string hashed with crc32 into a fixed space of
2^20 ids, so unseen words still fire shape and affix features and the model
never needs a vocabulary.  Two capacities share the templates: ``teacher``
uses all of them, ``student`` drops the distance-2 neighbor window and the
length-3 affixes.
"""

from __future__ import annotations

import zlib
from functools import lru_cache

import numpy as np

from ..corpus import Utterance

FEATURE_SPACE = 1 << 20

TEACHER = "teacher"
STUDENT = "student"
CAPACITIES = (TEACHER, STUDENT)


def check_capacity(capacity: str) -> None:
    if capacity not in CAPACITIES:
        raise ValueError(f"unknown capacity {capacity!r}, expected one of {CAPACITIES}")


def _shape(word: str) -> str:
    out = []
    for ch in word:
        if ch.isupper():
            out.append("X")
        elif ch.islower():
            out.append("x")
        elif ch.isdigit():
            out.append("d")
        else:
            out.append(ch)
    return "".join(out)


def _hash(name: str) -> int:
    return zlib.crc32(name.encode("utf-8")) & (FEATURE_SPACE - 1)


@lru_cache(maxsize=65536)
def _word_feature_names(word: str, capacity: str) -> tuple[str, ...]:
    """Templates that depend only on the word itself."""
    lower = word.lower()
    names = ["bias", f"w={word}", f"wl={lower}", f"shape={_shape(word)}"]
    max_affix = 3 if capacity == TEACHER else 2
    for k in range(1, max_affix + 1):
        if len(lower) > k:
            names.append(f"p{k}={lower[:k]}")
            names.append(f"s{k}={lower[-k:]}")
    return tuple(names)


def position_feature_names(
    words: tuple[str, ...], position: int, capacity: str = TEACHER
) -> list[str]:
    """Full template strings for one position, before hashing."""
    check_capacity(capacity)
    n = len(words)
    names = list(_word_feature_names(words[position], capacity))
    if position == 0:
        names.append("first")
    if position == n - 1:
        names.append("last")
    window = 2 if capacity == TEACHER else 1
    for d in range(1, window + 1):
        if position - d >= 0:
            names.append(f"prev{d}={words[position - d].lower()}")
        if position + d < n:
            names.append(f"next{d}={words[position + d].lower()}")
    return names


def features_for_words(
    words: tuple[str, ...], capacity: str = TEACHER
) -> list[np.ndarray]:
    """Per-position arrays of sorted, deduplicated hashed feature ids."""
    check_capacity(capacity)
    out = []
    for position in range(len(words)):
        names = position_feature_names(words, position, capacity)
        ids = np.fromiter((_hash(s) for s in names), dtype=np.int64, count=len(names))
        out.append(np.unique(ids))
    return out


def extract_features(
    utterance: Utterance, position: int, capacity: str = TEACHER
) -> dict[int, float]:
    """Sparse indicator features (id -> 1.0) for one token position."""
    if not (0 <= position < len(utterance)):
        raise IndexError(f"position {position} out of range for {len(utterance)} tokens")
    names = position_feature_names(utterance.texts, position, capacity)
    return {_hash(s): 1.0 for s in names}
