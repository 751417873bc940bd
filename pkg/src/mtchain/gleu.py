"""GLEU scoring between two texts.

GLEU compares the multisets of 1..n-gram subsequences of a candidate and a
reference token sequence, pooled across all orders: matching n-grams are
counted with per-gram clipping (min of the two occurrence counts), and the
score is the minimum of pooled precision and pooled recall.  The score is
symmetric in its arguments and always lies in [0, 1].
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass

TokenSequence = list[str]

NGram = tuple[str, ...]


@dataclass(frozen=True)
class NGramBag:
    """Multiset of all contiguous 1..n_max-grams of a token sequence."""

    counts: Counter[NGram]
    n_max: int

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class GleuScore:
    value: float
    precision: float
    recall: float


def tokenize(text: str) -> TokenSequence:
    """Normalize a raw string into word tokens.

    Applies unicode canonical composition (NFC), lowercases, splits on
    unicode whitespace, and strips punctuation from token boundaries
    (interior punctuation such as apostrophes and hyphens is kept).
    Tokens that are pure punctuation vanish.  Deterministic, and
    idempotent: re-tokenizing the joined tokens reproduces the sequence.
    """
    normalized = unicodedata.normalize("NFC", text).lower()
    tokens = []
    for raw in normalized.split():
        word = _strip_boundary_punctuation(raw)
        if word:
            tokens.append(word)
    return tokens


def _is_punctuation(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def _strip_boundary_punctuation(word: str) -> str:
    start = 0
    end = len(word)
    while start < end and _is_punctuation(word[start]):
        start += 1
    while end > start and _is_punctuation(word[end - 1]):
        end -= 1
    return word[start:end]


def extract_ngrams(tokens: TokenSequence, n_max: int) -> NGramBag:
    """Collect every contiguous subsequence of length 1..n_max with counts."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    counts: Counter[NGram] = Counter()
    for n in range(1, n_max + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i : i + n])] += 1
    return NGramBag(counts=counts, n_max=n_max)


def gleu(candidate: TokenSequence, reference: TokenSequence, n_max: int = 4) -> GleuScore:
    """Score a candidate against a reference token sequence.

    Matches are clipped per n-gram and pooled across orders 1..n_max:
    precision = matches / total candidate n-grams, recall = matches /
    total reference n-grams, value = min(precision, recall).  Two empty
    sequences are identical (score 1.0); exactly one empty scores 0.0.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    cand_bag = extract_ngrams(candidate, n_max)
    ref_bag = extract_ngrams(reference, n_max)
    cand_total = cand_bag.total()
    ref_total = ref_bag.total()
    if cand_total == 0 and ref_total == 0:
        return GleuScore(value=1.0, precision=1.0, recall=1.0)
    if cand_total == 0 or ref_total == 0:
        return GleuScore(value=0.0, precision=0.0, recall=0.0)
    matches = sum((cand_bag.counts & ref_bag.counts).values())
    precision = matches / cand_total
    recall = matches / ref_total
    return GleuScore(value=min(precision, recall), precision=precision, recall=recall)


def score_texts(candidate: str, reference: str, n_max: int = 4) -> GleuScore:
    """Tokenize two raw strings and score candidate against reference."""
    return gleu(tokenize(candidate), tokenize(reference), n_max=n_max)
