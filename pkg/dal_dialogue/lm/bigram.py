from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from dal_dialogue.errors import VocabError
from dal_dialogue.text.vocab import BOS_ID, EOS_ID, PAD_ID, TokenSeq

DEFAULT_K = 1.0


@dataclass(frozen=True)
class BigramLM:
    """Add-k smoothed bigram model over ids ``1..vocab_size``.

    PAD (id 0) is outside the event space. BOS only ever appears as a context,
    but it still counts as one of the ``vocab_size`` events in the denominator.
    """

    vocab_size: int
    k: float
    bigram_counts: dict[tuple[int, int], int]
    context_counts: dict[int, int] = field(init=False)
    # prev -> (next ids, counts), built once so a row lookup only touches its own context.
    _successors: dict[int, tuple[np.ndarray, np.ndarray]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (BOS and EOS)")
        if not self.k > 0:
            raise ValueError("k must be > 0")
        ctx: Counter[int] = Counter()
        rows: dict[int, list[tuple[int, int]]] = {}
        for (prev, nxt), c in self.bigram_counts.items():
            ctx[prev] += c
            rows.setdefault(prev, []).append((nxt, c))
        object.__setattr__(self, "context_counts", dict(ctx))
        successors = {
            prev: (np.array([w for w, _ in row], dtype=np.int64), np.array([c for _, c in row], dtype=float))
            for prev, row in rows.items()
        }
        object.__setattr__(self, "_successors", successors)

    def _check(self, idx: int) -> None:
        if not 1 <= idx <= self.vocab_size:
            raise VocabError(f"id {idx} outside LM event space 1..{self.vocab_size}")

    def prob(self, prev: int, nxt: int) -> float:
        self._check(prev)
        self._check(nxt)
        count = self.bigram_counts.get((prev, nxt), 0)
        return (count + self.k) / (self.context_counts.get(prev, 0) + self.k * self.vocab_size)

    def log_prob(self, prev: int, nxt: int) -> float:
        return math.log(self.prob(prev, nxt))

    def log_prob_row(self, prev: int) -> np.ndarray:
        """log P(w | prev) for every id ``0..vocab_size``; the PAD slot is 0.0."""

        self._check(prev)
        denom = self.context_counts.get(prev, 0) + self.k * self.vocab_size
        counts = np.zeros(self.vocab_size + 1)
        if prev in self._successors:
            ids, seen = self._successors[prev]
            counts[ids] = seen
        row = np.log((counts + self.k) / denom)
        row[PAD_ID] = 0.0
        return row

    def to_dict(self) -> dict[str, Any]:
        return {
            "vocab_size": self.vocab_size,
            "k": self.k,
            "bigrams": [[p, w, c] for (p, w), c in sorted(self.bigram_counts.items())],
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> BigramLM:
        try:
            counts = {(int(p), int(w)): int(c) for p, w, c in obj["bigrams"]}
            return cls(vocab_size=int(obj["vocab_size"]), k=float(obj["k"]), bigram_counts=counts)
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"malformed bigram LM payload: {e}") from e


def _transitions(seq: TokenSeq) -> Iterable[tuple[int, int]]:
    path = (BOS_ID, *seq, EOS_ID)
    return zip(path, path[1:], strict=False)


def fit(sequences: Sequence[TokenSeq], vocab_size: int, k: float = DEFAULT_K) -> BigramLM:
    if not k > 0:
        raise ValueError("k must be > 0")
    if not sequences:
        raise ValueError("cannot fit a bigram LM on zero sequences")

    counts: Counter[tuple[int, int]] = Counter()
    for seq in sequences:
        for prev, nxt in _transitions(seq):
            if not (1 <= prev <= vocab_size and 1 <= nxt <= vocab_size):
                raise VocabError(f"sequence {seq} has ids outside 1..{vocab_size}")
            counts[(prev, nxt)] += 1
    return BigramLM(vocab_size=vocab_size, k=float(k), bigram_counts=dict(counts))


def sequence_log_prob(lm: BigramLM, seq: TokenSeq) -> float:
    """Natural-log probability of BOS -> seq -> EOS."""

    if not seq:
        raise ValueError("sequence must be non-empty")
    return sum(lm.log_prob(prev, nxt) for prev, nxt in _transitions(seq))


def perplexity(lm: BigramLM, sequences: Sequence[TokenSeq]) -> float:
    if not sequences:
        raise ValueError("perplexity needs at least one sequence")
    total = sum(sequence_log_prob(lm, s) for s in sequences)
    n = sum(len(s) + 1 for s in sequences)
    return math.exp(-total / n)
