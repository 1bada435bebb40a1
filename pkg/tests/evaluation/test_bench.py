from __future__ import annotations

import json
import statistics
import tempfile
from pathlib import Path

import pytest

from dal_dialogue.decoding.factory import make_decoder
from dal_dialogue.decoding.mmi import MmiConfig
from dal_dialogue.evaluation.bench import BenchReport, benchmark_latency, run_benchmark
from dal_dialogue.states import DecoderKind, TrainMode
from dal_dialogue.text.synthetic import SyntheticSpec, synthesize_corpus
from dal_dialogue.training.model import DalModel
from dal_dialogue.training.trainer import pretrain
from tests.support.builders import toy_config, toy_corpus, toy_model


def _model(**dims: int) -> tuple[DalModel, list[tuple[int, ...]]]:
    corpus, _ = toy_corpus()
    model = toy_model(corpus, toy_config(TrainMode.MLE_ONLY, pretrain_epochs_gen=0, pretrain_epochs_disc=0), **dims)
    pretrain(model, corpus)
    return model, corpus.queries()


def test_noop_decoder_is_fast_but_positive() -> None:
    ms = benchmark_latency(lambda q: q, [(4,), (5, 6)], repetitions=3)
    assert 0.0 < ms < 5.0


def test_warm_up_pass_is_not_timed() -> None:
    calls: list[tuple[int, ...]] = []
    benchmark_latency(calls.append, [(4,), (5,)], repetitions=2)
    assert len(calls) == 6


def test_latency_arguments_are_checked() -> None:
    with pytest.raises(ValueError):
        benchmark_latency(lambda q: q, [(4,)], repetitions=0)
    with pytest.raises(ValueError):
        benchmark_latency(lambda q: q, [], repetitions=1)


def test_run_benchmark_covers_every_decoder_and_nbest() -> None:
    model, queries = _model()
    report = run_benchmark(model, MmiConfig(bidi_nbest=2), queries[:3], nbests=[1, 3], repetitions=1, max_len=3, seed=4)
    assert [e.name for e in report.entries] == ["greedy", "mmi-anti", "mmi-bidi-n1", "mmi-bidi-n3"]
    assert report.entry("mmi-anti").nbest == 2
    assert report.entry("mmi-bidi-n3").decoder == DecoderKind.MMI_BIDI
    assert all(e.latency_ms > 0 for e in report.entries)
    assert report.num_queries == 3
    assert report.to_lines()[0].startswith("greedy\t")
    assert report.to_lines()[0].endswith(" ms/query")
    with pytest.raises(KeyError):
        report.entry("beam")
    with pytest.raises(ValueError):
        run_benchmark(model, MmiConfig(), queries, nbests=[])


def test_bench_report_is_written_as_json() -> None:
    model, queries = _model()
    report = run_benchmark(model, MmiConfig(), queries[:2], nbests=[2], repetitions=1, max_len=3)
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "bench.json"
        report.write(path)
        obj = json.loads(path.read_text(encoding="utf-8"))
    assert obj["version"] == 1
    assert BenchReport.model_validate(obj) == report


@pytest.mark.slow
def test_decoders_are_ordered_by_cost() -> None:
    corpus, _ = synthesize_corpus(SyntheticSpec(n_safe=3, m=20, n_diverse=140, alphabet=20, min_len=3, max_len=5), 0)
    model = toy_model(corpus, toy_config(TrainMode.MLE_ONLY, pretrain_epochs_gen=0, pretrain_epochs_disc=0), hidden=32)
    pretrain(model, corpus)
    queries = corpus.queries()[:200]
    report = run_benchmark(model, MmiConfig(), queries, nbests=[5, 20], repetitions=10, max_len=8)
    greedy = report.entry("greedy").latency_ms
    assert greedy <= report.entry("mmi-anti").latency_ms
    assert greedy < report.entry("mmi-bidi-n5").latency_ms < report.entry("mmi-bidi-n20").latency_ms


@pytest.mark.slow
def test_more_repetitions_steady_the_measurement() -> None:
    model, queries = _model()
    decoder = make_decoder(DecoderKind.GREEDY, model, MmiConfig(), 4)

    def spread(repetitions: int) -> float:
        runs = [benchmark_latency(decoder, queries, repetitions) for _ in range(8)]
        return statistics.stdev(runs) / statistics.mean(runs)

    assert spread(10) < spread(1)
