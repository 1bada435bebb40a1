from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from dal_dialogue.autodiff.optim import UpdateRule, optimizer_step
from dal_dialogue.autodiff.primitives import add, backward, mul, scale, square, subtract, tsum
from dal_dialogue.autodiff.tensor import Tensor, constant, no_record, record
from dal_dialogue.errors import DivergenceError, NonFiniteError
from dal_dialogue.lm.bigram import fit, sequence_log_prob
from dal_dialogue.nets.discriminator import DiscriminatorParams, discriminator_step, score_pairs
from dal_dialogue.nets.generator import GeneratorParams, Sample, mle_step, sample_batch, sequence_log_probs
from dal_dialogue.paths import RunLayout
from dal_dialogue.states import Direction, TrainMode, TrainPhase
from dal_dialogue.text.corpus import Corpus, QRPair, as_pair, batch_iter, orient
from dal_dialogue.text.vocab import TokenSeq
from dal_dialogue.training.checkpoint import save_checkpoint
from dal_dialogue.training.model import DalModel, RewardBaseline
from dal_dialogue.training.seeding import derive_seed, rng_for
from dal_dialogue.training.trainlog import EpochRecord, TrainLog

logger = logging.getLogger(__name__)


def _mean(x: Tensor) -> Tensor:
    return scale(tsum(x), 1.0 / x.shape[0])


def _lm_offsets(model: DalModel, pairs: Sequence[QRPair]) -> np.ndarray:
    """log P_r(r) - log P_q(q) per pair, shape (B, 1)."""

    lm_q, lm_r = model.lms()
    return np.array([[sequence_log_prob(lm_r, p.response) - sequence_log_prob(lm_q, p.query)] for p in pairs])


def dual_terms(model: DalModel, pairs: Sequence[QRPair], direction: Direction | None = None) -> Tensor:
    """Per-pair duality regularizer, shape (B, 1).

    [log P_r(r) + log P(q|r) - log P_q(q) - log P(r|q)]^2. With ``direction`` set only
    that direction's generator is differentiated; the other one enters as a constant.
    """

    queries = [p.query for p in pairs]
    responses = [p.response for p in pairs]
    offsets = constant(_lm_offsets(model, pairs))

    def _lp(gen: GeneratorParams, src: list[TokenSeq], tgt: list[TokenSeq], live: bool) -> Tensor:
        if live:
            return sequence_log_probs(gen, src, tgt)
        with no_record():
            return sequence_log_probs(gen, src, tgt)

    lp_qr = _lp(model.gen_qr, queries, responses, direction in (None, Direction.QR))
    lp_rq = _lp(model.gen_rq, responses, queries, direction in (None, Direction.RQ))
    return square(add(subtract(lp_rq, lp_qr), offsets))


def dual_regularizer(model: DalModel, pair: QRPair) -> Tensor:
    return dual_terms(model, [pair])


def log_k(model: DalModel, pair: QRPair) -> float:
    """log P_q(q) - log P_r(r); the duality constraint fixes this ratio for each pair."""

    return -float(_lm_offsets(model, [pair])[0, 0])


def mean_dual(model: DalModel, pairs: Sequence[QRPair], batch_size: int = 64) -> float:
    total = 0.0
    with no_record():
        for start in range(0, len(pairs), batch_size):
            total += float(tsum(dual_terms(model, pairs[start : start + batch_size])).item())
    return total / len(pairs)


def dual_step(model: DalModel, batch: Sequence[QRPair], direction: Direction, lr: float) -> float:
    """Gradient step on the mean duality regularizer for one direction's generator."""

    gen = model.generator(direction)
    with record() as rec:
        loss = _mean(dual_terms(model, batch, direction))
    backward(loss, rec)
    value = loss.item()
    optimizer_step(gen.parameters(), lr, model.config.clip, model.rule(_gen_name(direction)))
    return value


def _gen_name(direction: Direction) -> str:
    return f"gen_{direction}"


def _disc_name(direction: Direction) -> str:
    return f"disc_{direction}"


def _sample_and_score(
    gen: GeneratorParams,
    disc: DiscriminatorParams,
    sources: Sequence[TokenSeq],
    direction: Direction,
    max_len: int,
    rng: np.random.Generator,
) -> tuple[list[Sample], np.ndarray]:
    samples = sample_batch(gen, sources, max_len, rng)
    with no_record():
        pairs = [as_pair(src, s.tokens, direction) for src, s in zip(sources, samples, strict=True)]
        rewards = score_pairs(disc, pairs).data[:, 0].copy()
    return samples, rewards


def _policy_term(gen: GeneratorParams, sources: Sequence[TokenSeq], samples: list[Sample], adv: np.ndarray) -> Tensor:
    """mean((R - b) * log p(y|x)) over the batch."""

    lp = sequence_log_probs(gen, sources, [s.tokens for s in samples], [s.terminated for s in samples])
    return _mean(mul(lp, constant(adv.reshape(-1, 1))))


def policy_gradient_step(
    gen: GeneratorParams,
    disc: DiscriminatorParams,
    baseline: RewardBaseline,
    sources: Sequence[TokenSeq],
    direction: Direction,
    lr: float,
    rng_seed: int,
    *,
    max_len: int = 20,
    weight: float = 1.0,
    clip: float = 5.0,
    rule: UpdateRule | None = None,
) -> float:
    """REINFORCE against a frozen discriminator; returns the batch-mean reward.

    The baseline is read before the update and moved towards the batch mean after it.
    """

    if not sources:
        raise ValueError("sources must be non-empty")
    samples, rewards = _sample_and_score(gen, disc, sources, direction, max_len, np.random.default_rng(rng_seed))
    adv = rewards - baseline.value
    with record() as rec:
        loss = scale(_policy_term(gen, sources, samples, adv), -weight)
    backward(loss, rec)
    optimizer_step(gen.parameters(), lr, clip, rule)
    mean_reward = float(rewards.mean())
    baseline.update(mean_reward)
    return mean_reward


def combined_generator_step(
    model: DalModel, batch: Sequence[QRPair], direction: Direction, lr: float, rng_seed: int
) -> tuple[float, float]:
    """One update on Υ - λ·J for a direction; returns (mean Υ, mean reward).

    Υ is taken on the real pairs of ``batch``, J on outputs sampled for their sources.
    """

    cfg = model.config
    gen = model.generator(direction)
    baseline = model.baselines[direction]
    sources, _ = orient(batch, direction)
    samples, rewards = _sample_and_score(
        gen, model.discriminator(direction), sources, direction, cfg.max_len, np.random.default_rng(rng_seed)
    )
    adv = rewards - baseline.value
    with record() as rec:
        dual = _mean(dual_terms(model, batch, direction))
        loss = add(dual, scale(_policy_term(gen, sources, samples, adv), -cfg.lambda_for(direction)))
    backward(loss, rec)
    dual_value = dual.item()
    optimizer_step(gen.parameters(), lr, cfg.clip, model.rule(_gen_name(direction)))
    mean_reward = float(rewards.mean())
    baseline.update(mean_reward)
    return dual_value, mean_reward


def teacher_forcing_step(model: DalModel, batch: Sequence[QRPair], direction: Direction, lr: float) -> float:
    return mle_step(
        model.generator(direction), batch, direction, lr, clip=model.config.clip, rule=model.rule(_gen_name(direction))
    )


def _fake_pairs(
    model: DalModel, batch: Sequence[QRPair], direction: Direction, rng: np.random.Generator
) -> list[QRPair]:
    sources, _ = orient(batch, direction)
    samples = sample_batch(model.generator(direction), sources, model.config.max_len, rng)
    return [as_pair(src, s.tokens, direction) for src, s in zip(sources, samples, strict=True)]


def _disc_update(model: DalModel, batch: Sequence[QRPair], direction: Direction, rng: np.random.Generator) -> float:
    fake = _fake_pairs(model, batch, direction, rng)
    return discriminator_step(
        model.discriminator(direction),
        batch,
        fake,
        model.config.lr_disc,
        clip=model.config.clip,
        rule=model.rule(_disc_name(direction)),
    )


class _Meter:
    def __init__(self) -> None:
        self._values: dict[str, list[float]] = {}

    def add(self, key: str, value: float) -> None:
        self._values.setdefault(key, []).append(float(value))

    def means(self) -> dict[str, float]:
        return {k: float(np.mean(v)) for k, v in sorted(self._values.items())}


def _epoch_record(
    model: DalModel,
    corpus: Corpus,
    phase: TrainPhase,
    epoch: int,
    mle: _Meter,
    disc: _Meter,
    reward: _Meter,
) -> EpochRecord:
    return EpochRecord(
        phase=phase,
        epoch=epoch,
        mode=model.config.mode,
        mean_dual=mean_dual(model, corpus.pairs, model.config.batch_size),
        mle_loss=mle.means(),
        disc_loss=disc.means(),
        reward=reward.means(),
        baseline={str(d): b.value for d, b in sorted(model.baselines.items())},
    )


def _finite_record(rec: EpochRecord) -> bool:
    values = [rec.mean_dual or 0.0, *rec.mle_loss.values(), *rec.disc_loss.values(), *rec.reward.values()]
    return all(math.isfinite(v) for v in values)


def _guarded_epoch(
    model: DalModel,
    epoch: int,
    run: Callable[[], EpochRecord],
    last_good: Path | None,
) -> EpochRecord:
    """Run one epoch; on a non-finite value restore the pre-epoch state and abort."""

    snap = model.snapshot()
    rule_states = model.rule_states()
    baselines = {d: (b.value, b.decay) for d, b in model.baselines.items()}
    try:
        rec = run()
        if not _finite_record(rec):
            raise NonFiniteError("non-finite loss in epoch summary")
    except NonFiniteError as e:
        model.restore(snap)
        model.load_rule_states(rule_states)
        for d, (value, decay) in baselines.items():
            model.baselines[d] = RewardBaseline(value=value, decay=decay)
        logger.error("training diverged at epoch %d: %s", epoch, e)
        raise DivergenceError(
            f"training diverged at epoch {epoch}: {e}", epoch=epoch, last_good_checkpoint=last_good
        ) from e
    return rec


def pretrain(model: DalModel, corpus: Corpus, log: TrainLog | None = None) -> TrainLog:
    """Fit both bigram LMs, then MLE-pretrain the generators and pretrain the discriminators."""

    cfg = model.config
    log = log if log is not None else TrainLog()
    lm_events = len(model.vocab) - 1
    model.lm_q = fit(corpus.queries(), lm_events, cfg.lm_k)
    model.lm_r = fit(corpus.responses(), lm_events, cfg.lm_k)

    for epoch in range(cfg.pretrain_epochs_gen):

        def gen_epoch(epoch: int = epoch) -> EpochRecord:
            mle = _Meter()
            for batch in batch_iter(corpus, cfg.batch_size, derive_seed(cfg.seed, "pretrain-gen", epoch)):
                for d in Direction:
                    mle.add(str(d), teacher_forcing_step(model, batch, d, cfg.lr_gen))
            return _epoch_record(model, corpus, TrainPhase.PRETRAIN_GEN, epoch, mle, _Meter(), _Meter())

        rec = _guarded_epoch(model, epoch, gen_epoch, None)
        log.append(rec)
        logger.info("pretrain-gen epoch %d: mle=%s dual=%.4f", epoch, rec.mle_loss, rec.mean_dual or 0.0)

    for epoch in range(cfg.pretrain_epochs_disc):

        def disc_epoch(epoch: int = epoch) -> EpochRecord:
            disc = _Meter()
            seed = derive_seed(cfg.seed, "pretrain-disc", epoch)
            for b, batch in enumerate(batch_iter(corpus, cfg.batch_size, seed)):
                for d in Direction:
                    disc.add(str(d), _disc_update(model, batch, d, rng_for(cfg.seed, "pretrain-disc", epoch, b, d)))
            return _epoch_record(model, corpus, TrainPhase.PRETRAIN_DISC, epoch, _Meter(), disc, _Meter())

        rec = _guarded_epoch(model, epoch, disc_epoch, None)
        log.append(rec)
        logger.info("pretrain-disc epoch %d: disc=%s", epoch, rec.disc_loss)

    return log


def _dal_epoch(model: DalModel, corpus: Corpus, epoch: int) -> EpochRecord:
    cfg = model.config
    mode = cfg.mode
    mle, disc, reward = _Meter(), _Meter(), _Meter()
    for b, batch in enumerate(batch_iter(corpus, cfg.batch_size, derive_seed(cfg.seed, "dal", epoch))):
        if mode.uses_adversarial:
            for i in range(cfg.d):
                for d in Direction:
                    disc.add(str(d), _disc_update(model, batch, d, rng_for(cfg.seed, "dal-disc", epoch, b, i, d)))

        for j in range(cfg.g):
            for d in Direction:
                gen_seed = derive_seed(cfg.seed, "dal-gen", epoch, b, j, d)
                if mode == TrainMode.DUAL_ADV:
                    _, r = combined_generator_step(model, batch, d, cfg.lr_gen, gen_seed)
                    reward.add(str(d), r)
                elif mode == TrainMode.DUAL_ONLY:
                    dual_step(model, batch, d, cfg.lr_gen)
                elif mode == TrainMode.ADV_ONLY:
                    sources, _ = orient(batch, d)
                    r = policy_gradient_step(
                        model.generator(d),
                        model.discriminator(d),
                        model.baselines[d],
                        sources,
                        d,
                        cfg.lr_gen,
                        gen_seed,
                        max_len=cfg.max_len,
                        weight=cfg.lambda_for(d),
                        clip=cfg.clip,
                        rule=model.rule(_gen_name(d)),
                    )
                    reward.add(str(d), r)
                mle.add(str(d), teacher_forcing_step(model, batch, d, cfg.lr_gen))

    return _epoch_record(model, corpus, TrainPhase.DAL, epoch, mle, disc, reward)


def _entry_checkpoint(model: DalModel, layout: RunLayout) -> Path | None:
    """Write the state the DAL loop starts from as ``last.ckpt``; skipped when it is already non-finite."""

    try:
        model.check_finite()
    except NonFiniteError as e:
        logger.warning("starting state not checkpointed: %s", e)
        return layout.last_checkpoint if layout.last_checkpoint.exists() else None
    return save_checkpoint(model, layout.last_checkpoint)


def train_dal(
    model: DalModel,
    corpus: Corpus,
    *,
    layout: RunLayout | None = None,
    log: TrainLog | None = None,
    start_epoch: int | None = None,
) -> TrainLog:
    """Outer DAL loop from ``start_epoch`` (default: the model's epoch counter) to ``dal_epochs``.

    With ``layout`` set, ``last.ckpt`` is written before the first epoch, then ``last.ckpt`` and the
    train log are rewritten after every epoch.
    """

    cfg = model.config
    log = log if log is not None else TrainLog()
    start = model.epoch if start_epoch is None else start_epoch
    if start < 0:
        raise ValueError("start_epoch must be >= 0")
    model.lms()

    last_good: Path | None = None
    if layout is not None and start < cfg.dal_epochs:
        last_good = _entry_checkpoint(model, layout)

    for epoch in range(start, cfg.dal_epochs):
        t0 = time.perf_counter()
        rec = _guarded_epoch(model, epoch, lambda epoch=epoch: _dal_epoch(model, corpus, epoch), last_good)
        model.epoch = epoch + 1
        log.append(rec)
        logger.info(
            "dal epoch %d (%s): dual=%.4f mle=%s disc=%s reward=%s baseline=%s (%.1fs)",
            epoch,
            cfg.mode,
            rec.mean_dual or 0.0,
            rec.mle_loss,
            rec.disc_loss,
            rec.reward,
            rec.baseline,
            time.perf_counter() - t0,
        )
        if layout is not None:
            last_good = save_checkpoint(model, layout.last_checkpoint)
            log.write(layout.train_log)
    return log
