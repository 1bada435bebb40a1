from __future__ import annotations

import json
import tempfile
from pathlib import Path

import pytest

from dal_dialogue.decoding.mmi import MmiConfig
from dal_dialogue.evaluation.report import ANNOTATION_RUBRIC, EvalReport, duality_diagnostics, evaluate_systems
from dal_dialogue.states import TrainMode
from dal_dialogue.training.model import DalModel
from dal_dialogue.training.trainer import pretrain
from tests.support.builders import toy_config, toy_corpus, toy_model


def _pretrained(seed: int = 0) -> DalModel:
    corpus, _ = toy_corpus()
    model = toy_model(corpus, toy_config(TrainMode.DUAL_ONLY, seed=seed, pretrain_epochs_gen=1, pretrain_epochs_disc=0))
    pretrain(model, corpus)
    return model


def test_evaluation_writes_report_and_aligned_response_files() -> None:
    corpus, layout = toy_corpus()
    model = _pretrained(0)
    baseline = _pretrained(1)
    queries = corpus.queries()[:5]
    with tempfile.TemporaryDirectory() as td:
        out = Path(td) / "report"
        report = evaluate_systems(
            model,
            MmiConfig(bidi_nbest=2),
            queries,
            out,
            baseline=baseline,
            max_len=4,
            workers=2,
            seed=3,
            corpus_fingerprint="abc",
            layout=layout,
            reverse_sources=corpus.responses()[:3],
            config_echo={"train.mode": "dual-only"},
        )

        assert [s.name for s in report.systems] == ["seq2seq", "dal-greedy", "mmi-anti", "mmi-bidi"]
        assert report.system("seq2seq").source == "baseline"
        assert report.system("mmi-bidi").nbest == 2
        for s in [*report.systems, report.reverse]:
            assert s is not None
            assert 0.0 <= s.distinct_1 <= 1.0
            assert 0.0 <= s.distinct_2 <= 1.0
            assert s.latency_ms > 0.0
            lines = (out / s.responses_file).read_text(encoding="utf-8").split("\n")
            assert len(lines) - 1 == (3 if s is report.reverse else 5)
        assert report.specific_win_rate is not None
        assert report.notes == []

        text = (out / "report.txt").read_text(encoding="utf-8")
        assert "distinct_level = token" in text
        assert "corpus_fingerprint = abc" in text
        assert "config.train.mode = dual-only" in text
        assert "system.mmi-bidi.distinct_2 = " in text
        assert EvalReport.model_validate(json.loads((out / "report.json").read_text(encoding="utf-8"))) == report
        assert (out / "annotation-rubric.txt").read_text(encoding="utf-8") == ANNOTATION_RUBRIC


def test_without_baseline_the_mmi_systems_use_the_model() -> None:
    corpus, _ = toy_corpus()
    model = _pretrained()
    with tempfile.TemporaryDirectory() as td:
        report = evaluate_systems(model, MmiConfig(bidi_nbest=2), corpus.queries()[:2], Path(td), max_len=3)
    assert [s.name for s in report.systems] == ["dal-greedy", "mmi-anti", "mmi-bidi"]
    assert report.system("mmi-anti").source == "model"
    assert report.notes
    assert report.reverse is None
    assert report.specific_win_rate is None
    with pytest.raises(KeyError):
        report.system("seq2seq")


def test_responses_are_deterministic() -> None:
    corpus, _ = toy_corpus()
    model = _pretrained()
    texts = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as td:
            report = evaluate_systems(model, MmiConfig(bidi_nbest=2), corpus.queries()[:4], Path(td), max_len=4)
            texts.append([(Path(td) / s.responses_file).read_text(encoding="utf-8") for s in report.systems])
    assert texts[0] == texts[1]


def test_empty_query_lists_are_rejected() -> None:
    with tempfile.TemporaryDirectory() as td, pytest.raises(ValueError):
        evaluate_systems(_pretrained(), MmiConfig(), [], Path(td))


def test_duality_diagnostics() -> None:
    corpus, _ = toy_corpus()
    model = _pretrained()
    assert duality_diagnostics(model, []) == (None, None)
    gap, k = duality_diagnostics(model, list(corpus.pairs[:3]))
    assert gap is not None and gap >= 0.0
    assert k is not None
