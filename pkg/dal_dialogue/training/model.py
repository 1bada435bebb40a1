from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from dal_dialogue.autodiff.optim import SGD, Momentum, UpdateRule
from dal_dialogue.lm.bigram import BigramLM
from dal_dialogue.nets.config import ModelDims
from dal_dialogue.nets.discriminator import DiscriminatorParams, init_discriminator
from dal_dialogue.nets.generator import GeneratorParams, init_generator
from dal_dialogue.nets.layers import ParamSet
from dal_dialogue.states import Direction
from dal_dialogue.text.vocab import Vocab
from dal_dialogue.training.config import TrainConfig
from dal_dialogue.training.seeding import rng_for


@dataclass
class RewardBaseline:
    """Exponential moving average of batch-mean rewards."""

    value: float = 0.5
    decay: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("baseline value must be in [0, 1]")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError("baseline decay must be in [0, 1)")

    def update(self, mean_reward: float) -> None:
        self.value = self.decay * self.value + (1.0 - self.decay) * float(mean_reward)


@dataclass
class DalModel:
    vocab: Vocab
    dims: ModelDims
    config: TrainConfig
    gen_qr: GeneratorParams
    gen_rq: GeneratorParams
    disc_qr: DiscriminatorParams
    disc_rq: DiscriminatorParams
    lm_q: BigramLM | None = None
    lm_r: BigramLM | None = None
    baselines: dict[Direction, RewardBaseline] = field(default_factory=dict)
    # Completed DAL epochs; resume starts from here.
    epoch: int = 0
    rules: dict[str, UpdateRule] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        for ps in self.components().values():
            if ps.dims.vocab_size != len(self.vocab):
                raise ValueError("all components must share the model vocab")
        for d in Direction:
            self.baselines.setdefault(d, RewardBaseline(decay=self.config.baseline_decay))
        if not self.rules:
            self.rules = {name: _make_rule(self.config) for name in self.components()}

    def components(self) -> dict[str, ParamSet]:
        return {"gen_qr": self.gen_qr, "gen_rq": self.gen_rq, "disc_qr": self.disc_qr, "disc_rq": self.disc_rq}

    def generator(self, direction: Direction) -> GeneratorParams:
        return self.gen_qr if direction == Direction.QR else self.gen_rq

    def reverse_generator(self, direction: Direction) -> GeneratorParams:
        return self.gen_rq if direction == Direction.QR else self.gen_qr

    def discriminator(self, direction: Direction) -> DiscriminatorParams:
        return self.disc_qr if direction == Direction.QR else self.disc_rq

    def rule(self, name: str) -> UpdateRule:
        return self.rules[name]

    def lms(self) -> tuple[BigramLM, BigramLM]:
        if self.lm_q is None or self.lm_r is None:
            raise ValueError("language models are not fitted; run pretrain first")
        return self.lm_q, self.lm_r

    def snapshot(self) -> dict[str, dict[str, np.ndarray]]:
        return {name: ps.snapshot() for name, ps in self.components().items()}

    def restore(self, snap: dict[str, dict[str, np.ndarray]]) -> None:
        for name, ps in self.components().items():
            ps.restore(snap[name])

    def rule_states(self) -> dict[str, dict[int, np.ndarray]]:
        return {name: rule.state() for name, rule in self.rules.items()}

    def load_rule_states(self, states: dict[str, dict[int, np.ndarray]]) -> None:
        for name, rule in self.rules.items():
            rule.load_state(states.get(name, {}))

    def check_finite(self) -> None:
        for ps in self.components().values():
            ps.check_finite()

    def with_config(self, config: TrainConfig) -> DalModel:
        """Same parameters (shared, not copied) under a different training config."""

        return replace(self, config=config, baselines=dict(self.baselines), rules={})


def _make_rule(config: TrainConfig) -> UpdateRule:
    return Momentum(config.momentum) if config.momentum > 0 else SGD()


def build_model(vocab: Vocab, dims: ModelDims, config: TrainConfig) -> DalModel:
    """Fresh model; every component draws its initial weights from a seed derived from ``config.seed``."""

    if dims.vocab_size != len(vocab):
        raise ValueError(f"dims.vocab_size={dims.vocab_size} does not match vocab size {len(vocab)}")
    return DalModel(
        vocab=vocab,
        dims=dims,
        config=config,
        gen_qr=init_generator(dims, rng_for(config.seed, "init", "gen_qr")),
        gen_rq=init_generator(dims, rng_for(config.seed, "init", "gen_rq")),
        disc_qr=init_discriminator(dims, rng_for(config.seed, "init", "disc_qr")),
        disc_rq=init_discriminator(dims, rng_for(config.seed, "init", "disc_rq")),
    )
