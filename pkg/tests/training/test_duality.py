from __future__ import annotations

import math
from typing import Any

import numpy as np
import pytest

from dal_dialogue.autodiff.gradcheck import grad_check
from dal_dialogue.autodiff.primitives import backward, scale, tsum
from dal_dialogue.autodiff.tensor import no_record, record
from dal_dialogue.lm.bigram import sequence_log_prob
from dal_dialogue.nets.discriminator import DiscriminatorParams
from dal_dialogue.nets.generator import GeneratorParams, Sample, conditional_log_prob, sample_batch, sequence_log_probs
from dal_dialogue.states import Direction, TrainMode
from dal_dialogue.training import trainer
from dal_dialogue.training.model import DalModel, RewardBaseline
from dal_dialogue.training.trainer import (
    combined_generator_step,
    dual_regularizer,
    dual_step,
    dual_terms,
    log_k,
    mean_dual,
    policy_gradient_step,
    pretrain,
    teacher_forcing_step,
)
from tests.support.builders import tiny_discriminator, tiny_generator, toy_config, toy_corpus, toy_model


def _fitted_model(**overrides: object) -> DalModel:
    corpus, _ = toy_corpus()
    cfg = toy_config(TrainMode.DUAL_ADV, pretrain_epochs_gen=0, pretrain_epochs_disc=0, **overrides)
    model = toy_model(corpus, cfg)
    pretrain(model, corpus)
    return model


def _flat(model: DalModel, name: str) -> np.ndarray:
    return np.concatenate([t.data.reshape(-1) for t in model.components()[name].parameters()])


def test_regularizer_matches_its_definition() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    lm_q, lm_r = model.lms()
    for pair in corpus.pairs[:4]:
        expected = (
            sequence_log_prob(lm_r, pair.response)
            + conditional_log_prob(model.gen_rq, pair.response, pair.query).item()
            - sequence_log_prob(lm_q, pair.query)
            - conditional_log_prob(model.gen_qr, pair.query, pair.response).item()
        ) ** 2
        assert dual_regularizer(model, pair).item() == pytest.approx(expected, rel=1e-9)
        assert dual_regularizer(model, pair).item() >= 0.0


def test_log_k_is_the_language_model_log_ratio() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    lm_q, lm_r = model.lms()
    pair = corpus.pairs[0]
    expected = sequence_log_prob(lm_q, pair.query) - sequence_log_prob(lm_r, pair.response)
    assert log_k(model, pair) == pytest.approx(expected)


def test_batched_terms_match_single_pairs() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    pairs = list(corpus.pairs[:5])
    batched = dual_terms(model, pairs).data[:, 0]
    for i, p in enumerate(pairs):
        assert batched[i] == pytest.approx(dual_regularizer(model, p).item(), rel=1e-9)
    assert mean_dual(model, pairs, batch_size=2) == pytest.approx(float(batched.mean()), rel=1e-9)


def test_regularizer_needs_fitted_language_models() -> None:
    corpus, _ = toy_corpus()
    model = toy_model(corpus)
    with pytest.raises(ValueError):
        dual_regularizer(model, corpus.pairs[0])


def test_regularizer_gradients_match_finite_differences() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    pair = corpus.pairs[0]
    params = model.gen_qr.parameters() + model.gen_rq.parameters()
    assert grad_check(lambda: dual_regularizer(model, pair), params) < 1e-4


def test_direction_restricts_gradient_flow() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    rq_before = _flat(model, "gen_rq")
    dual_step(model, list(corpus.pairs[:4]), Direction.QR, 0.1)
    np.testing.assert_array_equal(_flat(model, "gen_rq"), rq_before)


def test_dual_step_lowers_the_regularizer() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    batch = list(corpus.pairs[:4])
    with no_record():
        before = float(dual_terms(model, batch).data.mean())
    reported = dual_step(model, batch, Direction.QR, 0.01)
    with no_record():
        after = float(dual_terms(model, batch).data.mean())
    assert reported == pytest.approx(before, rel=1e-9)
    assert after < before


def test_combined_step_without_adversarial_weight_equals_dual_step() -> None:
    corpus, _ = toy_corpus()
    batch = list(corpus.pairs[:4])
    a = _fitted_model(lambda_qr=0.0)
    b = _fitted_model(lambda_qr=0.0)
    combined_generator_step(a, batch, Direction.QR, 0.3, rng_seed=5)
    dual_step(b, batch, Direction.QR, 0.3)
    np.testing.assert_array_equal(_flat(a, "gen_qr"), _flat(b, "gen_qr"))


def test_combined_step_is_deterministic_for_a_seed() -> None:
    corpus, _ = toy_corpus()
    batch = list(corpus.pairs[:4])
    a = _fitted_model()
    b = _fitted_model()
    first = combined_generator_step(a, batch, Direction.RQ, 0.3, 9)
    assert combined_generator_step(b, batch, Direction.RQ, 0.3, 9) == first
    np.testing.assert_array_equal(_flat(a, "gen_rq"), _flat(b, "gen_rq"))


def test_heavy_adversarial_weight_follows_the_policy_gradient() -> None:
    corpus, _ = toy_corpus()
    batch = list(corpus.pairs[:4])
    sources = [p.query for p in batch]
    a = _fitted_model(lambda_qr=10_000.0, clip=1e12)
    b = _fitted_model(lambda_qr=10_000.0, clip=1e12)
    for m in (a, b):
        m.baselines[Direction.QR].value = 0.0
    start = _flat(a, "gen_qr")

    combined_generator_step(a, batch, Direction.QR, 1e-6, rng_seed=3)
    policy_gradient_step(
        b.gen_qr,
        b.disc_qr,
        b.baselines[Direction.QR],
        sources,
        Direction.QR,
        1e-6,
        3,
        max_len=b.config.max_len,
        weight=10_000.0,
        clip=1e12,
    )
    da = _flat(a, "gen_qr") - start
    db = _flat(b, "gen_qr") - start
    cosine = float(da @ db / (np.linalg.norm(da) * np.linalg.norm(db)))
    assert cosine > 0.99


def test_rewards_equal_to_the_baseline_leave_the_generator_unchanged() -> None:
    model = _fitted_model()
    for t in model.disc_qr.parameters():
        t.data[...] = 0.0
    before = _flat(model, "gen_qr")
    baseline = model.baselines[Direction.QR]
    reward = policy_gradient_step(model.gen_qr, model.disc_qr, baseline, [(4, 5), (6,)], Direction.QR, 0.5, 1)
    assert reward == 0.5
    assert baseline.value == pytest.approx(0.5)
    np.testing.assert_array_equal(_flat(model, "gen_qr"), before)


def test_policy_gradient_rejects_empty_batches() -> None:
    model = _fitted_model()
    with pytest.raises(ValueError):
        policy_gradient_step(model.gen_qr, model.disc_qr, model.baselines[Direction.QR], [], Direction.QR, 0.5, 1)


def test_teacher_forcing_lowers_the_loss_on_a_small_corpus() -> None:
    corpus, _ = toy_corpus(n_safe=1, m=2, n_diverse=3)
    model = toy_model(corpus)
    batch = list(corpus.pairs)
    assert len(batch) == 5
    first = teacher_forcing_step(model, batch, Direction.QR, 0.5)
    losses = [teacher_forcing_step(model, batch, Direction.QR, 0.5) for _ in range(100)]
    assert losses[-1] < first


def test_teacher_forcing_with_zero_learning_rate_keeps_parameters() -> None:
    corpus, _ = toy_corpus()
    model = _fitted_model()
    before = _flat(model, "gen_rq")
    assert teacher_forcing_step(model, list(corpus.pairs[:3]), Direction.RQ, 0.0) > 0.0
    np.testing.assert_array_equal(_flat(model, "gen_rq"), before)


def _constant_discriminator(prob: float) -> DiscriminatorParams:
    disc = tiny_discriminator(2)
    for t in disc.parameters():
        t.data[...] = 0.0
    disc["fc2.b"].data[...] = math.log(prob / (1.0 - prob))
    return disc


def _flat_params(gen: GeneratorParams) -> np.ndarray:
    return np.concatenate([t.data.reshape(-1) for t in gen.parameters()])


def _mean_log_prob_gradient(gen: GeneratorParams, sources: list[tuple[int, ...]], rng_seed: int) -> np.ndarray:
    samples = sample_batch(gen, sources, 4, np.random.default_rng(rng_seed))
    with record() as rec:
        lp = sequence_log_probs(gen, sources, [s.tokens for s in samples], [s.terminated for s in samples])
        loss = scale(tsum(lp), 1.0 / len(sources))
    backward(loss, rec)
    return np.concatenate(
        [(t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(-1) for t in gen.parameters()]
    )


def test_policy_update_is_the_advantage_times_the_log_prob_gradient() -> None:
    sources = [(4, 5), (6,), (3, 7, 4)]
    reference = tiny_generator(7, spread=0.5)
    gen = tiny_generator(7, spread=0.5)
    grad = _mean_log_prob_gradient(reference, sources, rng_seed=9)
    before = _flat_params(gen)

    disc = _constant_discriminator(0.9)
    baseline = RewardBaseline(value=0.5)
    reward = policy_gradient_step(gen, disc, baseline, sources, Direction.QR, 0.01, 9, max_len=4, clip=1e12)
    assert reward == pytest.approx(0.9)
    np.testing.assert_allclose(_flat_params(gen) - before, 0.01 * 0.4 * grad, rtol=1e-7, atol=1e-13)


def test_shifting_rewards_and_baseline_together_keeps_the_update(monkeypatch: pytest.MonkeyPatch) -> None:
    sources = [(4, 5), (6,), (3, 7, 4)]
    disc = tiny_discriminator(3)
    plain, shifted = tiny_generator(8, spread=0.5), tiny_generator(8, spread=0.5)
    start = _flat_params(plain)
    base_plain, base_shifted = RewardBaseline(value=0.2), RewardBaseline(value=0.5)

    r_plain = policy_gradient_step(plain, disc, base_plain, sources, Direction.QR, 0.05, 4, max_len=4)
    real_score = trainer._sample_and_score

    def plus_constant(*args: Any, **kwargs: Any) -> tuple[list[Sample], np.ndarray]:
        samples, rewards = real_score(*args, **kwargs)
        return samples, rewards + 0.3

    monkeypatch.setattr(trainer, "_sample_and_score", plus_constant)
    r_shifted = policy_gradient_step(shifted, disc, base_shifted, sources, Direction.QR, 0.05, 4, max_len=4)

    assert r_shifted == pytest.approx(r_plain + 0.3)
    assert base_shifted.value == pytest.approx(base_plain.value + 0.3)
    assert not np.allclose(_flat_params(plain), start)
    np.testing.assert_allclose(_flat_params(shifted), _flat_params(plain), rtol=0, atol=1e-12)
