from __future__ import annotations

import pytest

from dal_dialogue.evaluation.metrics import distinct_n, specific_win_rate, mean_length
from dal_dialogue.text.corpus import QRPair
from dal_dialogue.text.synthetic import SyntheticLayout
from tests.support.builders import fixed_output_generator

A, B, C, D = 4, 5, 6, 7


def test_distinct_hand_counted_examples() -> None:
    assert distinct_n([(A, B), (A, B)], 1) == 0.5
    assert distinct_n([(A, B), (C, D)], 1) == 1.0
    assert distinct_n([(A, A, A)], 2) == 0.5


def test_distinct_is_order_free() -> None:
    responses = [(A, B, C), (A, B), (D,), (C, C, A)]
    for n in (1, 2, 3):
        assert distinct_n(responses, n) == distinct_n(list(reversed(responses)), n)


def test_short_responses_contribute_nothing() -> None:
    assert distinct_n([(A,), ()], 2) == 0.0
    assert distinct_n([(A,), (B, C)], 2) == 1.0
    assert distinct_n([], 1) == 0.0


def test_distinct_stays_in_range() -> None:
    value = distinct_n([(A, B, A, B), (B, A)], 2)
    assert 0.0 < value < 1.0


def test_distinct_rejects_bad_n() -> None:
    with pytest.raises(ValueError):
        distinct_n([(A,)], 0)


def test_mean_length() -> None:
    assert mean_length([(A, B), (), (C,)]) == 1.0
    assert mean_length([]) == 0.0


def test_specific_win_rate_counts_specific_wins() -> None:
    layout = SyntheticLayout(
        safe_responses=((A,),),
        diverse_pairs=(QRPair(query=(3,), response=(B,)), QRPair(query=(C,), response=(B, B))),
    )
    assert specific_win_rate(fixed_output_generator({B: 2.0}), layout) == 1.0
    assert specific_win_rate(fixed_output_generator({A: 2.0}), layout) == 0.0
    assert specific_win_rate(fixed_output_generator({B: 2.0}), layout, [layout.diverse_pairs[0]]) == 1.0


def test_specific_win_rate_needs_both_kinds_of_pairs() -> None:
    with pytest.raises(ValueError):
        specific_win_rate(fixed_output_generator({}), SyntheticLayout(safe_responses=(), diverse_pairs=()))
