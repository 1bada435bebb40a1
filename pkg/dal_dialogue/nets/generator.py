from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from dal_dialogue.autodiff.optim import DEFAULT_CLIP, UpdateRule, optimizer_step
from dal_dialogue.autodiff.primitives import (
    add,
    backward,
    concat,
    embedding,
    log_softmax,
    matmul,
    mul,
    scale,
    select_column,
    softmax,
    tsum,
)
from dal_dialogue.autodiff.tensor import Tensor, constant, no_record, record
from dal_dialogue.nets.config import ModelDims
from dal_dialogue.nets.layers import ParamSet, encode_padded, gru_step, init_embedding, init_gru, pad_batch, uniform
from dal_dialogue.states import Direction
from dal_dialogue.text.corpus import QRPair, orient
from dal_dialogue.text.vocab import BOS_ID, EOS_ID, PAD_ID, TokenSeq, check_ids

# PAD and BOS are never emitted; their logits are pushed down by a large finite constant.
_BLOCKED_IDS = (PAD_ID, BOS_ID)
_BLOCK_VALUE = -1e9
# Attention score offset for padded source positions.
_MASK_VALUE = -1e9

StepBonus = Callable[[int, np.ndarray], np.ndarray]


class GeneratorParams(ParamSet):
    """Embedding, GRU encoder, attentive GRU decoder (input feeding) and output projection."""


def init_generator(dims: ModelDims, rng: np.random.Generator) -> GeneratorParams:
    v, e, h = dims.vocab_size, dims.emb, dims.hidden
    tensors = init_embedding(rng, v, e, "emb")
    tensors |= init_gru(rng, "enc", e, h)
    tensors |= init_gru(rng, "dec", e + h, h)
    tensors["attn.w"] = Tensor(uniform(rng, (h, h), 1.0 / np.sqrt(h)), name="attn.w")
    tensors["out.w"] = Tensor(uniform(rng, (2 * h, v), 1.0 / np.sqrt(2 * h)), name="out.w")
    tensors["out.b"] = Tensor(np.zeros((1, v)), name="out.b")
    return GeneratorParams(dims=dims, tensors=tensors)


def _logit_mask(vocab_size: int) -> np.ndarray:
    m = np.zeros((1, vocab_size))
    m[0, list(_BLOCKED_IDS)] = _BLOCK_VALUE
    return m


@dataclass(frozen=True)
class _Memory:
    states: list[Tensor]
    mask_add: Tensor
    logit_mask: Tensor


@dataclass(frozen=True)
class _DecoderState:
    h: Tensor
    ctx: Tensor

    def rows(self, idx: np.ndarray) -> _DecoderState:
        return _DecoderState(h=constant(self.h.data[idx]), ctx=constant(self.ctx.data[idx]))


def _start(ps: GeneratorParams, sources: Sequence[TokenSeq]) -> tuple[_Memory, _DecoderState]:
    for s in sources:
        if not s:
            raise ValueError("source sequences must be non-empty")
    batch = pad_batch(sources, ps.dims.vocab_size, what="source")
    states, final = encode_padded(ps, "emb", "enc", batch)
    mask_add = constant(np.where(batch.mask > 0, 0.0, _MASK_VALUE))
    memory = _Memory(states=states, mask_add=mask_add, logit_mask=constant(_logit_mask(ps.dims.vocab_size)))
    ctx = constant(np.zeros((batch.batch, ps.dims.hidden)))
    return memory, _DecoderState(h=final, ctx=ctx)


def _attend(ps: GeneratorParams, h: Tensor, memory: _Memory) -> Tensor:
    q = matmul(h, ps["attn.w"])
    scores = concat([tsum(mul(q, enc), axis=1) for enc in memory.states])
    weights = softmax(add(scores, memory.mask_add))
    ctx: Tensor | None = None
    for s, enc in enumerate(memory.states):
        term = mul(select_column(weights, s), enc)
        ctx = term if ctx is None else add(ctx, term)
    assert ctx is not None
    return ctx


def _step(
    ps: GeneratorParams, memory: _Memory, state: _DecoderState, prev_ids: np.ndarray
) -> tuple[Tensor, _DecoderState]:
    x = concat([embedding(ps["emb"], prev_ids), state.ctx])
    h = gru_step(ps, "dec", x, state.h)
    ctx = _attend(ps, h, memory)
    logits = add(add(matmul(concat([h, ctx]), ps["out.w"]), ps["out.b"]), memory.logit_mask)
    return log_softmax(logits), _DecoderState(h=h, ctx=ctx)


def sequence_log_probs(
    ps: GeneratorParams,
    sources: Sequence[TokenSeq],
    targets: Sequence[TokenSeq],
    terminated: Sequence[bool] | None = None,
) -> Tensor:
    """Teacher-forced log P(target | source) per row, shape (B, 1).

    Decoder input is BOS + target; labels are target + EOS for terminated rows
    (the default) and the bare target otherwise.
    """

    if len(sources) != len(targets):
        raise ValueError("sources and targets must have the same length")
    if terminated is None:
        terminated = [True] * len(targets)
    vocab_size = ps.dims.vocab_size
    for t in targets:
        check_ids(t, vocab_size, what="target")

    labels = [(*t, EOS_ID) if term else tuple(t) for t, term in zip(targets, terminated, strict=True)]
    steps = max(len(lab) for lab in labels) if labels else 0
    memory, state = _start(ps, sources)
    batch = len(sources)
    if steps == 0:
        return constant(np.zeros((batch, 1)))

    inputs = np.full((batch, steps), PAD_ID, dtype=np.int64)
    inputs[:, 0] = BOS_ID
    for i, t in enumerate(targets):
        n = min(len(t), steps - 1)
        inputs[i, 1 : 1 + n] = t[:n]

    total: Tensor | None = None
    for t in range(steps):
        logp, state = _step(ps, memory, state, inputs[:, t])
        pick = np.zeros((batch, vocab_size))
        for i, lab in enumerate(labels):
            if t < len(lab):
                pick[i, lab[t]] = 1.0
        term = tsum(mul(logp, constant(pick)), axis=1)
        total = term if total is None else add(total, term)
    assert total is not None
    return total


def conditional_log_prob(ps: GeneratorParams, source: TokenSeq, target: TokenSeq) -> Tensor:
    return sequence_log_probs(ps, [source], [target])


@dataclass(frozen=True)
class Sample:
    tokens: TokenSeq
    # log-prob of each emitted token, aligned with ``tokens``
    log_probs: tuple[float, ...]
    terminated: bool
    # log-prob of the closing EOS; None when max_len was hit first
    stop_log_prob: float | None = None

    @property
    def total_log_prob(self) -> float:
        return sum(self.log_probs) + (self.stop_log_prob or 0.0)


def sample_batch(
    ps: GeneratorParams, sources: Sequence[TokenSeq], max_len: int, rng: np.random.Generator
) -> list[Sample]:
    """Multinomial sampling, one row per source; rows draw from ``rng`` in row order each step."""

    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    vocab_size = ps.dims.vocab_size
    batch = len(sources)
    tokens: list[list[int]] = [[] for _ in range(batch)]
    lps: list[list[float]] = [[] for _ in range(batch)]
    stop: list[float | None] = [None] * batch
    alive = np.ones(batch, dtype=bool)

    with no_record():
        memory, state = _start(ps, sources)
        prev = np.full(batch, BOS_ID, dtype=np.int64)
        for _ in range(max_len):
            logp, state = _step(ps, memory, state, prev)
            nxt = np.full(batch, PAD_ID, dtype=np.int64)
            for i in np.flatnonzero(alive):
                p = np.exp(logp.data[i])
                tok = int(rng.choice(vocab_size, p=p / p.sum()))
                lp = float(logp.data[i, tok])
                if tok == EOS_ID:
                    stop[i] = lp
                    alive[i] = False
                else:
                    tokens[i].append(tok)
                    lps[i].append(lp)
                    nxt[i] = tok
            if not alive.any():
                break
            prev = nxt

    return [
        Sample(tokens=tuple(tokens[i]), log_probs=tuple(lps[i]), terminated=stop[i] is not None, stop_log_prob=stop[i])
        for i in range(batch)
    ]


def sample_output(
    ps: GeneratorParams, source: TokenSeq, max_len: int, rng_seed: int
) -> tuple[TokenSeq, tuple[float, ...]]:
    s = sample_batch(ps, [source], max_len, np.random.default_rng(rng_seed))[0]
    return s.tokens, s.log_probs


def _blocked(scores: np.ndarray) -> np.ndarray:
    scores = scores.copy()
    scores[:, list(_BLOCKED_IDS)] = -np.inf
    return scores


def greedy_decode(ps: GeneratorParams, source: TokenSeq, max_len: int) -> TokenSeq:
    """Argmax each step (lowest id wins ties) until EOS or ``max_len`` tokens."""

    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    out: list[int] = []
    with no_record():
        memory, state = _start(ps, [source])
        prev = np.array([BOS_ID], dtype=np.int64)
        for _ in range(max_len):
            logp, state = _step(ps, memory, state, prev)
            tok = int(np.argmax(_blocked(logp.data)[0]))
            if tok == EOS_ID:
                break
            out.append(tok)
            prev = np.array([tok], dtype=np.int64)
    return tuple(out)


@dataclass(frozen=True)
class Hypothesis:
    tokens: TokenSeq
    score: float
    terminated: bool
    # decoding step at which the hypothesis left the beam
    finished_at: int


def _lex_ranks(seqs: list[TokenSeq]) -> np.ndarray:
    order = sorted(range(len(seqs)), key=lambda i: seqs[i])
    ranks = np.empty(len(seqs), dtype=np.int64)
    ranks[order] = np.arange(len(seqs))
    return ranks


def beam_decode(
    ps: GeneratorParams,
    source: TokenSeq,
    beam_size: int,
    max_len: int,
    *,
    step_bonus: StepBonus | None = None,
) -> list[Hypothesis]:
    """Beam search with raw (unnormalized) summed log-prob scores.

    ``step_bonus(position, prev_ids)`` may add a (beams, V) array to the step scores;
    positions count from 1. Hypotheses that emit EOS retire to the result pool; live
    ones still running after ``max_len`` tokens retire unterminated. Results are
    ordered by score, then earlier completion, then token ids.
    """

    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    vocab_size = ps.dims.vocab_size

    pool: list[Hypothesis] = []
    with no_record():
        memory, state = _start(ps, [source])
        live: list[TokenSeq] = [()]
        live_scores = np.zeros(1)
        prev = np.array([BOS_ID], dtype=np.int64)
        for t in range(max_len):
            logp, state = _step(ps, memory, state, prev)
            scores = logp.data
            if step_bonus is not None:
                scores = scores + step_bonus(t + 1, prev)
            total = live_scores[:, None] + _blocked(scores)

            rows = np.repeat(np.arange(len(live)), vocab_size)
            words = np.tile(np.arange(vocab_size), len(live))
            flat = total.reshape(-1)
            ranks = _lex_ranks(live)[rows]
            order = np.lexsort((words, ranks, -flat))
            order = order[np.isfinite(flat[order])][:beam_size]

            keep_rows: list[int] = []
            next_live: list[TokenSeq] = []
            next_scores: list[float] = []
            for j in order:
                k, w, sc = int(rows[j]), int(words[j]), float(flat[j])
                if w == EOS_ID:
                    pool.append(Hypothesis(tokens=live[k], score=sc, terminated=True, finished_at=t))
                else:
                    keep_rows.append(k)
                    next_live.append((*live[k], w))
                    next_scores.append(sc)
            if not next_live:
                live = []
                break
            idx = np.array(keep_rows, dtype=np.int64)
            state = state.rows(idx)
            live, live_scores = next_live, np.array(next_scores)
            prev = np.array([s[-1] for s in live], dtype=np.int64)

        for tokens, sc in zip(live, live_scores, strict=True):
            pool.append(Hypothesis(tokens=tokens, score=float(sc), terminated=False, finished_at=max_len))

    pool.sort(key=lambda h: (-h.score, h.finished_at, h.tokens))
    return pool[: min(beam_size, len(pool))]


def mle_step(
    ps: GeneratorParams,
    batch: Sequence[QRPair],
    direction: Direction,
    lr: float,
    *,
    clip: float = DEFAULT_CLIP,
    rule: UpdateRule | None = None,
) -> float:
    """One update on the mean teacher-forced NLL; returns the pre-update loss."""

    if not batch:
        raise ValueError("batch must be non-empty")
    sources, targets = orient(batch, direction)
    with record() as rec:
        lp = sequence_log_probs(ps, sources, targets)
        loss = scale(tsum(lp), -1.0 / len(batch))
    backward(loss, rec)
    value = loss.item()
    optimizer_step(ps.parameters(), lr, clip, rule)
    return value
