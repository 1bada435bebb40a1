from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from dal_dialogue.autodiff.tensor import no_record
from dal_dialogue.lm.bigram import BigramLM
from dal_dialogue.nets.generator import GeneratorParams, StepBonus, beam_decode, greedy_decode, sequence_log_probs
from dal_dialogue.text.vocab import TokenSeq

logger = logging.getLogger(__name__)

_NBEST_MAX = 200


@dataclass(frozen=True)
class MmiConfig:
    anti_lm_weight: float = 0.5
    # Only the first ``anti_lm_threshold`` output positions are penalized.
    anti_lm_threshold: int = 5
    bidi_nbest: int = 5
    bidi_reverse_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.anti_lm_weight < 0:
            raise ValueError("anti_lm_weight must be >= 0")
        if self.anti_lm_threshold < 0:
            raise ValueError("anti_lm_threshold must be >= 0")
        if not 1 <= self.bidi_nbest <= _NBEST_MAX:
            raise ValueError(f"bidi_nbest must be in [1, {_NBEST_MAX}]")
        if not 0.0 <= self.bidi_reverse_weight <= 1.0:
            raise ValueError("bidi_reverse_weight must be in [0, 1]")


@dataclass(frozen=True)
class DecodeResult:
    tokens: TokenSeq
    score: float
    # True when every N-best hypothesis was empty and greedy output was returned instead.
    fallback: bool = False


def _anti_lm_bonus(lm: BigramLM, cfg: MmiConfig, vocab_size: int) -> StepBonus:
    rows: dict[int, np.ndarray] = {}

    def bonus(position: int, prev_ids: np.ndarray) -> np.ndarray:
        out = np.zeros((len(prev_ids), vocab_size))
        if position > cfg.anti_lm_threshold:
            return out
        for i, prev in enumerate(prev_ids):
            p = int(prev)
            if p not in rows:
                rows[p] = lm.log_prob_row(p)[:vocab_size]
            out[i] = -cfg.anti_lm_weight * rows[p]
        return out

    return bonus


def mmi_anti_decode(
    gen_qr: GeneratorParams, lm_r: BigramLM, cfg: MmiConfig, source: TokenSeq, max_len: int
) -> TokenSeq:
    """Beam search (width ``bidi_nbest``) under log P(w|...) - weight * log P_lm(w|prev) for early positions."""

    if lm_r.vocab_size + 1 != gen_qr.dims.vocab_size:
        raise ValueError("anti-LM and generator vocabularies differ")
    bonus = None
    if cfg.anti_lm_weight > 0 and cfg.anti_lm_threshold > 0:
        bonus = _anti_lm_bonus(lm_r, cfg, gen_qr.dims.vocab_size)
    best = beam_decode(gen_qr, source, cfg.bidi_nbest, max_len, step_bonus=bonus)
    return best[0].tokens


def mmi_bidi_rerank(
    gen_qr: GeneratorParams, gen_rq: GeneratorParams, cfg: MmiConfig, source: TokenSeq, max_len: int
) -> list[DecodeResult]:
    """N-best by the forward model, rescored with (1-w)·forward + w·reverse, best first."""

    nbest = [h for h in beam_decode(gen_qr, source, cfg.bidi_nbest, max_len) if h.tokens]
    if not nbest:
        return []
    w = cfg.bidi_reverse_weight
    with no_record():
        reverse = sequence_log_probs(gen_rq, [h.tokens for h in nbest], [source] * len(nbest)).data[:, 0]
    scored = [
        DecodeResult(tokens=h.tokens, score=(1.0 - w) * h.score + w * float(rev))
        for h, rev in zip(nbest, reverse, strict=True)
    ]
    # sorted() is stable, so equal scores keep beam order.
    return sorted(scored, key=lambda r: -r.score)


def mmi_bidi_decode(
    gen_qr: GeneratorParams, gen_rq: GeneratorParams, cfg: MmiConfig, source: TokenSeq, max_len: int
) -> DecodeResult:
    ranked = mmi_bidi_rerank(gen_qr, gen_rq, cfg, source, max_len)
    if ranked:
        return ranked[0]
    logger.warning("mmi-bidi: empty N-best for source of length %d, falling back to greedy", len(source))
    tokens = greedy_decode(gen_qr, source, max_len)
    with no_record():
        forward = sequence_log_probs(gen_qr, [source], [tokens]).item()
    return DecodeResult(tokens=tokens, score=forward, fallback=True)
