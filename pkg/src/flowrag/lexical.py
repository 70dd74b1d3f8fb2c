"""Tokenization and an Okapi-weighted lexical ranker.

Serves as the retrieval baseline and as the scorer behind lexical hard
negative sampling. No stemming or stop words; documents are short catalog
item texts.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class UnknownDoc(KeyError):
    """Requested doc id was never indexed."""


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric runs; "send_email" becomes
    ["send", "email"]."""
    return _TOKEN_RE.findall(text.lower())


def find_occurrences(tokens: list[str], phrase: tuple[str, ...]) -> list[int]:
    """Start positions where ``phrase`` occurs contiguously in ``tokens``."""
    if not phrase or len(phrase) > len(tokens):
        return []
    first = phrase[0]
    span = len(phrase)
    return [
        i
        for i in range(len(tokens) - span + 1)
        if tokens[i] == first and tuple(tokens[i : i + span]) == phrase
    ]


@dataclass
class LexicalIndex:
    k1: float = 1.2
    b: float = 0.75
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    avg_doc_length: float = 0.0
    doc_count: int = 0
    _doc_terms: dict[str, Counter] = field(default_factory=dict)

    @staticmethod
    def build(docs: dict[str, str], k1: float = 1.2, b: float = 0.75) -> "LexicalIndex":
        """Index ``doc id -> text``. Iteration order of postings follows
        ascending doc id so downstream tie-breaks are reproducible."""
        index = LexicalIndex(k1=k1, b=b)
        for doc_id in sorted(docs):
            tokens = tokenize(docs[doc_id])
            counts = Counter(tokens)
            index._doc_terms[doc_id] = counts
            index.doc_lengths[doc_id] = len(tokens)
            for term in sorted(counts):
                index.postings.setdefault(term, []).append((doc_id, counts[term]))
        index.doc_count = len(docs)
        if index.doc_count:
            index.avg_doc_length = sum(index.doc_lengths.values()) / index.doc_count
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


def lexical_score(index: LexicalIndex, query: list[str], doc_id: str) -> float:
    """Okapi score of one document for a tokenized query; 0.0 when no query
    term occurs in the document."""
    if doc_id not in index.doc_lengths:
        raise UnknownDoc(doc_id)
    counts = index._doc_terms[doc_id]
    length = index.doc_lengths[doc_id]
    score = 0.0
    for term in query:
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        norm = tf + index.k1 * (1.0 - index.b + index.b * length / index.avg_doc_length)
        score += index.idf(term) * tf * (index.k1 + 1.0) / norm
    return score


def lexical_topk(index: LexicalIndex, query: list[str], k: int) -> list[tuple[str, float]]:
    """Top-k doc ids by score descending, ties by ascending id; zero-score
    documents are excluded, so the result may be shorter than k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores: dict[str, float] = {}
    for term in set(query):
        for doc_id, _ in index.postings.get(term, ()):
            if doc_id not in scores:
                scores[doc_id] = lexical_score(index, query, doc_id)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [(doc_id, s) for doc_id, s in ranked if s > 0.0][:k]
