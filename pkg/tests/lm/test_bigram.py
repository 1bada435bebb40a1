from __future__ import annotations

import itertools
import math

import pytest

from dal_dialogue.errors import VocabError
from dal_dialogue.lm.bigram import BigramLM, fit, perplexity, sequence_log_prob

# Toy event space: BOS=1, EOS=2, a=3, b=4, c=5.
A, B, C = 3, 4, 5
BOS, EOS = 1, 2


def _toy() -> BigramLM:
    return fit([(A, B), (A, C)], vocab_size=5, k=1.0)


def test_hand_counted_probabilities() -> None:
    lm = _toy()
    assert lm.prob(A, B) == pytest.approx(2 / 7)
    assert lm.prob(BOS, A) == pytest.approx(3 / 7)
    assert lm.prob(C, B) == pytest.approx(1 / 6)


def test_sequence_log_prob() -> None:
    lm = _toy()
    assert sequence_log_prob(lm, (A,)) == pytest.approx(math.log(3 / 7) + math.log(1 / 7))
    for seq in [(A,), (B, C), (C, C, C, A)]:
        assert sequence_log_prob(lm, seq) <= 0.0


def test_context_counts_match_bigrams() -> None:
    lm = _toy()
    for prev, total in lm.context_counts.items():
        assert total == sum(c for (p, _), c in lm.bigram_counts.items() if p == prev)


def test_every_context_is_normalized() -> None:
    lm = _toy()
    for prev in range(1, 6):
        assert abs(sum(lm.prob(prev, w) for w in range(1, 6)) - 1.0) < 1e-9
        row = lm.log_prob_row(prev)
        assert row[0] == 0.0
        assert abs(sum(math.exp(x) for x in row[1:]) - 1.0) < 1e-9


def test_total_mass_never_exceeds_one() -> None:
    # V=3: BOS=1, EOS=2, a=3. Paths end at the first EOS, so interior tokens are BOS or a.
    lm = fit([(3,), (3, 3), (1, 3)], vocab_size=3, k=0.5)
    mass = 0.0
    for n in range(1, 5):
        for seq in itertools.product((1, 3), repeat=n):
            mass += math.exp(sequence_log_prob(lm, seq))
    assert 0.0 < mass <= 1.0


def test_more_observations_never_lower_probability() -> None:
    base = fit([(A, B), (A, C)], vocab_size=5)
    more = fit([(A, B), (A, C), (A, B)], vocab_size=5)
    assert more.prob(A, B) >= base.prob(A, B)


def test_fit_is_deterministic() -> None:
    assert _toy() == _toy()


def test_errors() -> None:
    with pytest.raises(ValueError):
        fit([], vocab_size=5)
    with pytest.raises(ValueError):
        fit([(A,)], vocab_size=5, k=0.0)
    with pytest.raises(VocabError):
        fit([(6,)], vocab_size=5)
    lm = _toy()
    with pytest.raises(VocabError):
        sequence_log_prob(lm, (0,))
    with pytest.raises(ValueError):
        sequence_log_prob(lm, ())


def test_perplexity_of_uniform_model() -> None:
    lm = BigramLM(vocab_size=4, k=1.0, bigram_counts={})
    assert perplexity(lm, [(3, 4), (3,)]) == pytest.approx(4.0)


def test_dict_payload() -> None:
    lm = _toy()
    assert BigramLM.from_dict(lm.to_dict()) == lm
    with pytest.raises(ValueError):
        BigramLM.from_dict({"vocab_size": 5, "k": 1.0})


def test_log_prob_row_agrees_with_pointwise_log_prob() -> None:
    lm = fit([(A, B), (A, C), (B, B, A), (C,)], vocab_size=5, k=0.5)
    for prev in range(1, 6):
        row = lm.log_prob_row(prev)
        assert row.shape == (6,)
        assert row[0] == 0.0
        for w in range(1, 6):
            assert row[w] == pytest.approx(lm.log_prob(prev, w))


def test_log_prob_row_for_unseen_context_is_uniform() -> None:
    lm = _toy()
    # EOS never appears as a context.
    row = lm.log_prob_row(EOS)
    assert list(row[1:]) == pytest.approx([math.log(1 / 5)] * 5)
