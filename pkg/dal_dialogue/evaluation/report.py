from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from dal_dialogue.autodiff.tensor import no_record
from dal_dialogue.decoding.factory import TokenDecoder, make_decoder, make_reverse_decoder
from dal_dialogue.decoding.mmi import MmiConfig
from dal_dialogue.evaluation.bench import benchmark_latency
from dal_dialogue.evaluation.metrics import distinct_n, specific_win_rate, mean_length
from dal_dialogue.paths import ReportLayout, atomic_write_text
from dal_dialogue.states import DecoderKind, TrainMode
from dal_dialogue.text.corpus import QRPair
from dal_dialogue.text.synthetic import SyntheticLayout
from dal_dialogue.text.vocab import TokenSeq, decode
from dal_dialogue.training.model import DalModel
from dal_dialogue.training.trainer import dual_terms, log_k
from dal_dialogue.workers import parallel_map

logger = logging.getLogger(__name__)

_REPORT_VERSION = 1
_GAP_BATCH = 64
_HEADER_KEYS = ("version", "distinct_level", "seed", "mode", "num_queries", "corpus_fingerprint", "specific_win_rate")

ANNOTATION_RUBRIC = """\
Response annotation rubric (one score per query/response line)

2  Relevant and informative: answers the query and carries content specific to it.
1  Acceptable but generic: fluent and on topic, yet could answer many other queries.
0  Unacceptable: ungrammatical, off topic, or contradicts the query.

Files: responses.<system>.txt hold one response per line, aligned with the query file.
Score each system independently; blank lines are empty responses and score 0.
"""


class SystemReport(BaseModel):
    name: str
    decoder: DecoderKind
    # Which checkpoint produced the responses: "model" or "baseline".
    source: str
    nbest: int | None = None
    distinct_1: float = Field(ge=0.0, le=1.0)
    distinct_2: float = Field(ge=0.0, le=1.0)
    mean_length: float
    latency_ms: float = Field(gt=0.0)
    mean_duality_gap: float | None = None
    mean_log_k: float | None = None
    responses_file: str


class EvalReport(BaseModel):
    version: int = _REPORT_VERSION
    distinct_level: str = "token"
    seed: int
    mode: TrainMode
    num_queries: int
    corpus_fingerprint: str | None = None
    specific_win_rate: float | None = None
    systems: list[SystemReport] = Field(default_factory=list)
    reverse: SystemReport | None = None
    config: dict[str, Any] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)

    def system(self, name: str) -> SystemReport:
        for s in self.systems:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_text(self) -> str:
        lines = ["# dal_dialogue evaluation report (key = value)"]
        data = self.model_dump(mode="json")
        for key in _HEADER_KEYS:
            lines.append(f"{key} = {_fmt(data[key])}")
        for s in data["systems"]:
            lines.extend(_system_lines(f"system.{s['name']}", s))
        if data["reverse"] is not None:
            lines.extend(_system_lines("reverse", data["reverse"]))
        for k, v in sorted(data["config"].items()):
            lines.append(f"config.{k} = {_fmt(v)}")
        for i, note in enumerate(data["notes"]):
            lines.append(f"note.{i} = {note}")
        return "\n".join(lines) + "\n"

    def write(self, layout: ReportLayout) -> None:
        atomic_write_text(layout.report_text, self.to_text())
        body = json.dumps(self.model_dump(mode="json"), ensure_ascii=False, indent=2, sort_keys=True)
        atomic_write_text(layout.report_json, body + "\n")


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _system_lines(prefix: str, s: dict[str, Any]) -> list[str]:
    return [f"{prefix}.{k} = {_fmt(v)}" for k, v in s.items() if k != "name"]


def duality_diagnostics(model: DalModel, pairs: Sequence[QRPair]) -> tuple[float | None, float | None]:
    """Mean |duality gap| (sqrt of the regularizer) and mean log k over ``pairs``."""

    if not pairs:
        return None, None
    gaps: list[float] = []
    with no_record():
        for start in range(0, len(pairs), _GAP_BATCH):
            chunk = pairs[start : start + _GAP_BATCH]
            gaps.extend(math.sqrt(float(v)) for v in dual_terms(model, chunk).data[:, 0])
    ks = [log_k(model, p) for p in pairs]
    for p, g, k in zip(pairs, gaps, ks, strict=True):
        logger.debug("pair q=%s r=%s gap=%.4f log_k=%.4f", p.query, p.response, g, k)
    return sum(gaps) / len(gaps), sum(ks) / len(ks)


def _write_responses(path: Path, responses: Sequence[TokenSeq], model: DalModel) -> None:
    atomic_write_text(path, "".join(decode(r, model.vocab) + "\n" for r in responses))


def _run_system(
    name: str,
    kind: DecoderKind,
    source: str,
    decoder: TokenDecoder,
    queries: Sequence[TokenSeq],
    model: DalModel,
    layout: ReportLayout,
    *,
    nbest: int | None,
    workers: int,
    latency_repetitions: int,
    reverse: bool = False,
) -> SystemReport:
    responses = parallel_map(decoder, queries, workers)
    latency = benchmark_latency(decoder, queries, latency_repetitions)
    path = layout.responses(name)
    _write_responses(path, responses, model)

    if reverse:
        pairs = [QRPair(query=out, response=src) for src, out in zip(queries, responses, strict=True) if out]
    else:
        pairs = [QRPair(query=src, response=out) for src, out in zip(queries, responses, strict=True) if out]
    gap, k = duality_diagnostics(model, pairs)

    rep = SystemReport(
        name=name,
        decoder=kind,
        source=source,
        nbest=nbest,
        distinct_1=distinct_n(responses, 1),
        distinct_2=distinct_n(responses, 2),
        mean_length=mean_length(responses),
        latency_ms=latency,
        mean_duality_gap=gap,
        mean_log_k=k,
        responses_file=path.name,
    )
    logger.info(
        "%s: distinct-1=%.4f distinct-2=%.4f len=%.2f latency=%.3fms",
        name,
        rep.distinct_1,
        rep.distinct_2,
        rep.mean_length,
        rep.latency_ms,
    )
    return rep


def evaluate_systems(
    model: DalModel,
    mmi: MmiConfig,
    queries: Sequence[TokenSeq],
    out_dir: Path,
    *,
    baseline: DalModel | None = None,
    max_len: int | None = None,
    workers: int = 1,
    latency_repetitions: int = 1,
    seed: int = 0,
    corpus_fingerprint: str | None = None,
    layout: SyntheticLayout | None = None,
    reverse_sources: Sequence[TokenSeq] | None = None,
    config_echo: dict[str, Any] | None = None,
) -> EvalReport:
    """Decode ``queries`` with every system, score them, and write the report plus response files.

    Systems: the MLE baseline checkpoint (greedy) when given, the current model (greedy),
    and the two MMI decoders over the baseline generators (or the current ones without a
    baseline). Duality diagnostics always use the current model.
    """

    if not queries:
        raise ValueError("evaluation needs at least one query")
    max_len = max_len or model.config.max_len
    out = ReportLayout(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    notes: list[str] = []

    plan: list[tuple[str, DecoderKind, str, DalModel, int | None]] = []
    if baseline is not None:
        plan.append(("seq2seq", DecoderKind.GREEDY, "baseline", baseline, None))
    else:
        notes.append("seq2seq system skipped: no baseline checkpoint given")
    plan.append(("dal-greedy", DecoderKind.GREEDY, "model", model, None))
    mmi_model, mmi_source = (baseline, "baseline") if baseline is not None else (model, "model")
    plan.append(("mmi-anti", DecoderKind.MMI_ANTI, mmi_source, mmi_model, mmi.bidi_nbest))
    plan.append(("mmi-bidi", DecoderKind.MMI_BIDI, mmi_source, mmi_model, mmi.bidi_nbest))

    systems = [
        _run_system(
            name,
            kind,
            source,
            make_decoder(kind, m, mmi, max_len),
            queries,
            model,
            out,
            nbest=nbest,
            workers=workers,
            latency_repetitions=latency_repetitions,
        )
        for name, kind, source, m, nbest in plan
    ]

    reverse = None
    if reverse_sources:
        reverse = _run_system(
            "reverse-greedy",
            DecoderKind.GREEDY,
            "model",
            make_reverse_decoder(model, max_len),
            reverse_sources,
            model,
            out,
            nbest=None,
            workers=workers,
            latency_repetitions=latency_repetitions,
            reverse=True,
        )

    win_rate = None
    if layout is not None and layout.diverse_pairs and layout.safe_responses:
        win_rate = specific_win_rate(model.gen_qr, layout)

    report = EvalReport(
        seed=seed,
        mode=model.config.mode,
        num_queries=len(queries),
        corpus_fingerprint=corpus_fingerprint,
        specific_win_rate=win_rate,
        systems=systems,
        reverse=reverse,
        config=dict(config_echo or {}),
        notes=notes,
    )
    report.write(out)
    atomic_write_text(out.rubric, ANNOTATION_RUBRIC)
    return report
