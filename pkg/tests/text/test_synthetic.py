from __future__ import annotations

import tempfile
from collections import Counter
from pathlib import Path

import pytest

from dal_dialogue.errors import CorpusError
from dal_dialogue.text.corpus import corpus_to_tsv
from dal_dialogue.text.synthetic import (
    SyntheticSpec,
    read_layout,
    split_heldout,
    synthesize_corpus,
    write_layout,
)
from dal_dialogue.text.vocab import UNK_ID


def test_small_corpus_structure() -> None:
    corpus, layout = synthesize_corpus(SyntheticSpec(n_safe=1, m=3, n_diverse=2), seed=0)
    assert len(corpus) == 5
    (safe,) = layout.safe_responses
    assert sum(1 for p in corpus.pairs if p.response == safe) == 3
    assert len(layout.diverse_pairs) == 2
    assert set(layout.diverse_pairs) <= set(corpus.pairs)


def test_same_seed_same_bytes() -> None:
    spec = SyntheticSpec(n_safe=2, m=4, n_diverse=10)
    a, _ = synthesize_corpus(spec, seed=7)
    b, _ = synthesize_corpus(spec, seed=7)
    c, _ = synthesize_corpus(spec, seed=8)
    assert corpus_to_tsv(a) == corpus_to_tsv(b)
    assert corpus_to_tsv(a) != corpus_to_tsv(c)


def test_fixed_length_corpus_has_distinct_queries() -> None:
    spec = SyntheticSpec(n_safe=2, m=5, n_diverse=50, alphabet=40, min_len=4, max_len=4)
    corpus, layout = synthesize_corpus(spec, seed=3)
    assert len(corpus) == 60
    assert len(set(corpus.queries())) == 60
    assert all(len(q) == 4 for q in corpus.queries())
    assert all(UNK_ID not in q for q in corpus.queries())

    counts = Counter(corpus.responses())
    for r in layout.safe_responses:
        assert counts[r] == 5
    for p in layout.diverse_pairs:
        assert counts[p.response] == 1


def test_enumerated_draws_are_distinct() -> None:
    # 3 + 9 + 27 possible utterances: small enough to enumerate.
    spec = SyntheticSpec(n_safe=1, m=3, n_diverse=4, alphabet=3, min_len=1, max_len=3)
    corpus, _ = synthesize_corpus(spec, seed=1)
    utterances = corpus.queries() + [p.response for p in corpus.pairs[3:]]
    assert len(set(utterances)) == len(utterances)


def test_alphabet_too_small() -> None:
    with pytest.raises(CorpusError):
        synthesize_corpus(SyntheticSpec(n_safe=1, m=3, n_diverse=2, alphabet=2, min_len=1, max_len=1), seed=0)


def test_spec_validation() -> None:
    with pytest.raises(ValueError):
        SyntheticSpec(m=0)
    with pytest.raises(ValueError):
        SyntheticSpec(min_len=5, max_len=4)
    assert SyntheticSpec().utterances_needed == 3 * 20 + 3 + 2 * 200


def test_layout_file_and_heldout_split() -> None:
    corpus, layout = synthesize_corpus(SyntheticSpec(n_safe=2, m=3, n_diverse=6), seed=2)
    kept, sub_layout, held = split_heldout(corpus, layout, 4, seed=5)
    assert len(kept) == len(corpus) - 4
    assert len(held) == 4
    assert set(sub_layout.diverse_pairs) <= set(kept.pairs)
    assert sub_layout.safe_responses == layout.safe_responses

    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "corpus.layout.json"
        write_layout(sub_layout, kept.vocab, path)
        assert read_layout(path, kept.vocab) == sub_layout


def test_unreadable_layout() -> None:
    corpus, _ = synthesize_corpus(SyntheticSpec(n_safe=1, m=2, n_diverse=2), seed=0)
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CorpusError):
            read_layout(path, corpus.vocab)
