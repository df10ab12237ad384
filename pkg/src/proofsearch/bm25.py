"""Okapi BM25 over small sentence corpora.

Tokenization is deliberately plain: lowercase, split on non-alphanumerics,
no stemming or stopwords.  Defaults k1=1.2, b=0.75.
"""

from __future__ import annotations

import math
import re
from collections import Counter

from .errors import EmptyCorpusError

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class Bm25Index:
    """Immutable term statistics for a list of documents."""

    def __init__(self, documents: list[str], k1: float = 1.2, b: float = 0.75):
        if k1 < 0 or not 0.0 <= b <= 1.0:
            raise ValueError("k1 must be >= 0 and b within [0, 1]")
        self.documents = list(documents)
        self.k1 = float(k1)
        self.b = float(b)
        self._term_counts = [Counter(tokenize(doc)) for doc in self.documents]
        self._lengths = [sum(c.values()) for c in self._term_counts]
        n = len(self.documents)
        self._avgdl = (sum(self._lengths) / n) if n else 0.0
        df: Counter[str] = Counter()
        for counts in self._term_counts:
            df.update(counts.keys())
        self._idf = {
            term: math.log(1.0 + (n - d + 0.5) / (d + 0.5)) for term, d in df.items()
        }

    def __len__(self) -> int:
        return len(self.documents)

    def score(self, query: str, doc_index: int) -> float:
        counts = self._term_counts[doc_index]
        if not counts:
            return 0.0
        norm = self.k1 * (1.0 - self.b + self.b * self._lengths[doc_index] / self._avgdl)
        total = 0.0
        for term in tokenize(query):
            tf = counts.get(term)
            if not tf:
                continue
            total += self._idf[term] * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def scores(self, query: str) -> list[float]:
        return [self.score(query, i) for i in range(len(self.documents))]


def bm25_topk(
    index: Bm25Index, query: str, k: int, exclude: set[str] | frozenset[str] = frozenset()
) -> list[tuple[str, float]]:
    """Top-k documents for the query, descending score, ties by document
    index.  Excluded documents are dropped before the ranking is truncated."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not len(index):
        raise EmptyCorpusError("cannot rank over an empty corpus")
    pool = [i for i, doc in enumerate(index.documents) if doc not in exclude]
    ranked = sorted(pool, key=lambda i: (-index.score(query, i), i))
    return [(index.documents[i], index.score(query, i)) for i in ranked[:k]]
