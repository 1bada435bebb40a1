from __future__ import annotations

import json
import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path

from pydantic import BaseModel, Field

from dal_dialogue.decoding.factory import make_decoder
from dal_dialogue.decoding.mmi import MmiConfig
from dal_dialogue.paths import atomic_write_text
from dal_dialogue.states import DecoderKind
from dal_dialogue.text.vocab import TokenSeq
from dal_dialogue.training.model import DalModel

logger = logging.getLogger(__name__)

_BENCH_VERSION = 1

Decoder = Callable[[TokenSeq], object]


def benchmark_latency(decoder: Decoder, queries: Sequence[TokenSeq], repetitions: int = 10) -> float:
    """Mean wall-clock milliseconds per query, after one untimed warm-up pass.

    Runs on the calling thread so timings stay comparable between decoders.
    """

    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not queries:
        raise ValueError("queries must be non-empty")

    for q in queries:
        decoder(q)

    elapsed_ns = 0
    for _ in range(repetitions):
        t0 = time.perf_counter_ns()
        for q in queries:
            decoder(q)
        elapsed_ns += time.perf_counter_ns() - t0
    # Never report zero, even below timer resolution.
    elapsed_ns = max(elapsed_ns, 1)
    return elapsed_ns / 1e6 / repetitions / len(queries)


class BenchEntry(BaseModel):
    name: str
    decoder: DecoderKind
    nbest: int | None = None
    latency_ms: float = Field(gt=0.0)


class BenchReport(BaseModel):
    version: int = _BENCH_VERSION
    seed: int
    num_queries: int
    repetitions: int
    entries: list[BenchEntry] = Field(default_factory=list)

    def entry(self, name: str) -> BenchEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_lines(self) -> list[str]:
        return [f"{e.name}\t{e.latency_ms:.4f} ms/query" for e in self.entries]

    def write(self, path: Path) -> None:
        body = json.dumps(self.model_dump(mode="json"), ensure_ascii=False, indent=2, sort_keys=True)
        atomic_write_text(path, body + "\n")


def run_benchmark(
    model: DalModel,
    mmi: MmiConfig,
    queries: Sequence[TokenSeq],
    *,
    nbests: Sequence[int],
    repetitions: int = 10,
    max_len: int | None = None,
    seed: int = 0,
) -> BenchReport:
    """Latency of greedy, mmi-anti and mmi-bidi at every N in ``nbests`` on the same queries."""

    if not nbests:
        raise ValueError("nbests must be non-empty")
    max_len = max_len or model.config.max_len
    plan: list[tuple[str, DecoderKind, int | None, MmiConfig]] = [
        ("greedy", DecoderKind.GREEDY, None, mmi),
        ("mmi-anti", DecoderKind.MMI_ANTI, mmi.bidi_nbest, mmi),
    ]
    for n in nbests:
        plan.append((f"mmi-bidi-n{n}", DecoderKind.MMI_BIDI, n, replace(mmi, bidi_nbest=int(n))))

    report = BenchReport(seed=seed, num_queries=len(queries), repetitions=repetitions)
    for name, kind, nbest, cfg in plan:
        ms = benchmark_latency(make_decoder(kind, model, cfg, max_len), queries, repetitions)
        logger.info("bench %s: %.4f ms/query", name, ms)
        report.entries.append(BenchEntry(name=name, decoder=kind, nbest=nbest, latency_ms=ms))
    return report
