from __future__ import annotations

from collections.abc import Sequence

from nltk.util import ngrams

from dal_dialogue.autodiff.tensor import no_record
from dal_dialogue.nets.generator import GeneratorParams, sequence_log_probs
from dal_dialogue.text.corpus import QRPair
from dal_dialogue.text.synthetic import SyntheticLayout
from dal_dialogue.text.vocab import TokenSeq


def distinct_n(responses: Sequence[TokenSeq], n: int) -> float:
    """Distinct n-grams over total n-grams, pooled across all responses; 0.0 when there are none."""

    if n < 1:
        raise ValueError("n must be >= 1")
    seen: set[tuple[int, ...]] = set()
    total = 0
    for r in responses:
        grams = list(ngrams(r, n))
        total += len(grams)
        seen.update(grams)
    return len(seen) / total if total else 0.0


def mean_length(responses: Sequence[TokenSeq]) -> float:
    return sum(len(r) for r in responses) / len(responses) if responses else 0.0


def specific_win_rate(gen_qr: GeneratorParams, layout: SyntheticLayout, pairs: Sequence[QRPair] | None = None) -> float:
    """Fraction of one-to-one queries whose own response outscores every shared (safe) response.

    ``pairs`` defaults to all diverse pairs in ``layout``.
    """

    diverse = list(layout.diverse_pairs if pairs is None else pairs)
    safe = list(layout.safe_responses)
    if not diverse or not safe:
        raise ValueError("specific-response win rate needs diverse pairs and safe responses")

    wins = 0
    with no_record():
        for p in diverse:
            targets = [p.response, *safe]
            lp = sequence_log_probs(gen_qr, [p.query] * len(targets), targets).data[:, 0]
            if lp[0] > lp[1:].max():
                wins += 1
    return wins / len(diverse)
