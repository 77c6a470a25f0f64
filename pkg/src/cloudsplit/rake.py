"""Keyword extraction by rapid automatic keyword extraction.

Candidate phrases are maximal runs of non-stopword words: a phrase breaks at
stopwords, at any punctuation between words, and at nothing else (plain
whitespace, including newlines, keeps a phrase together). Each word w is
scored degree(w) / frequency(w) over the document's phrase co-occurrence
graph, where degree counts w's co-occurrences including itself (each phrase
occurrence of length L adds L to every member word); a phrase scores the sum
of its member word scores.

Extraction is deterministic for a fixed stopword list and records character
offsets of every occurrence so manifests can splice the original text.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import AbstractSet, Iterator

from .model import canonical_term
from .stopwords import STOPWORDS

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class Term:
    """A candidate phrase: canonical text, score, and every occurrence span
    (character offsets into the source text)."""

    text: str
    score: float
    occurrences: tuple[tuple[int, int], ...]


def _phrase_instances(
    text: str, stopwords: AbstractSet[str]
) -> Iterator[tuple[tuple[str, ...], int, int]]:
    """Yield (words, start, end) for each candidate phrase occurrence."""
    words: list[str] = []
    start = end = 0
    prev_end: int | None = None
    for match in _WORD_RE.finditer(text):
        word = canonical_term(match.group())
        if word in stopwords:
            if words:
                yield tuple(words), start, end
                words = []
            prev_end = match.end()
            continue
        if words and prev_end is not None:
            gap = text[prev_end:match.start()]
            if any(not ch.isspace() for ch in gap):
                yield tuple(words), start, end
                words = []
        if not words:
            start = match.start()
        words.append(word)
        end = match.end()
        prev_end = match.end()
    if words:
        yield tuple(words), start, end


def extract_terms(
    text: str, stopwords: AbstractSet[str] = STOPWORDS
) -> list[Term]:
    """Extract scored candidate phrases in first-occurrence order.

    Duplicate phrases are merged, accumulating their occurrence spans.
    Empty text, or text made entirely of stopwords and punctuation, yields
    an empty list.
    """
    instances = list(_phrase_instances(text, stopwords))
    if not instances:
        return []

    freq: dict[str, int] = defaultdict(int)
    degree: dict[str, int] = defaultdict(int)
    for words, _, _ in instances:
        for word in words:
            freq[word] += 1
            degree[word] += len(words)

    word_score = {w: degree[w] / freq[w] for w in freq}

    order: list[str] = []
    spans: dict[str, list[tuple[int, int]]] = {}
    scores: dict[str, float] = {}
    for words, start, end in instances:
        phrase = " ".join(words)
        if phrase not in spans:
            order.append(phrase)
            spans[phrase] = []
            scores[phrase] = sum(word_score[w] for w in words)
        spans[phrase].append((start, end))

    return [
        Term(phrase, scores[phrase], tuple(spans[phrase]))
        for phrase in order
        if scores[phrase] > 0
    ]
