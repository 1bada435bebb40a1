from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from dal_dialogue.autodiff.optim import DEFAULT_CLIP, UpdateRule, optimizer_step
from dal_dialogue.autodiff.primitives import add, backward, concat, log_sigmoid_pair, scale, sigmoid, tanh, tsum
from dal_dialogue.autodiff.tensor import Tensor, record
from dal_dialogue.nets.config import ModelDims
from dal_dialogue.nets.layers import (
    ParamSet,
    encode_padded,
    feed_forward,
    init_embedding,
    init_gru,
    init_linear,
    pad_batch,
)
from dal_dialogue.text.corpus import QRPair
from dal_dialogue.text.vocab import TokenSeq


class DiscriminatorParams(ParamSet):
    """Separate query/response embeddings and GRU encoders feeding two fully-connected layers."""


def init_discriminator(dims: ModelDims, rng: np.random.Generator) -> DiscriminatorParams:
    v, e, h, f = dims.vocab_size, dims.emb, dims.hidden, dims.ffn_size
    tensors = init_embedding(rng, v, e, "q_emb")
    tensors |= init_gru(rng, "q_enc", e, h)
    tensors |= init_embedding(rng, v, e, "r_emb")
    tensors |= init_gru(rng, "r_enc", e, h)
    tensors |= init_linear(rng, "fc1", 2 * h, f)
    tensors |= init_linear(rng, "fc2", f, 1)
    return DiscriminatorParams(dims=dims, tensors=tensors)


def score_logits(ps: DiscriminatorParams, queries: Sequence[TokenSeq], responses: Sequence[TokenSeq]) -> Tensor:
    if len(queries) != len(responses):
        raise ValueError("queries and responses must have the same length")
    if any(not s for s in (*queries, *responses)):
        raise ValueError("discriminator inputs must be non-empty")
    vocab_size = ps.dims.vocab_size
    _, v_q = encode_padded(ps, "q_emb", "q_enc", pad_batch(queries, vocab_size, what="query"))
    _, v_r = encode_padded(ps, "r_emb", "r_enc", pad_batch(responses, vocab_size, what="response"))
    hidden = tanh(feed_forward(ps, "fc1", concat([v_q, v_r])))
    return feed_forward(ps, "fc2", hidden)


def score_pairs(ps: DiscriminatorParams, pairs: Sequence[QRPair]) -> Tensor:
    """Probability that each pair is human-generated, shape (B, 1)."""

    return sigmoid(score_logits(ps, [p.query for p in pairs], [p.response for p in pairs]))


def score_pair(ps: DiscriminatorParams, query: TokenSeq, response: TokenSeq) -> Tensor:
    return sigmoid(score_logits(ps, [query], [response]))


def discriminator_loss(ps: DiscriminatorParams, real: Sequence[QRPair], fake: Sequence[QRPair]) -> Tensor:
    """-mean log D(real) - mean log(1 - D(fake))."""

    if not real or not fake:
        raise ValueError("real and fake pair lists must both be non-empty")
    log_d_real, _ = log_sigmoid_pair(score_logits(ps, [p.query for p in real], [p.response for p in real]))
    _, log_not_d_fake = log_sigmoid_pair(score_logits(ps, [p.query for p in fake], [p.response for p in fake]))
    real_term = scale(tsum(log_d_real), -1.0 / len(real))
    fake_term = scale(tsum(log_not_d_fake), -1.0 / len(fake))
    return add(real_term, fake_term)


def discriminator_step(
    ps: DiscriminatorParams,
    real: Sequence[QRPair],
    fake: Sequence[QRPair],
    lr: float,
    *,
    clip: float = DEFAULT_CLIP,
    rule: UpdateRule | None = None,
) -> float:
    with record() as rec:
        loss = discriminator_loss(ps, real, fake)
    backward(loss, rec)
    value = loss.item()
    optimizer_step(ps.parameters(), lr, clip, rule)
    return value
