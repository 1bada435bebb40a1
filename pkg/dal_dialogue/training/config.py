from __future__ import annotations

from dataclasses import dataclass

from dal_dialogue.states import Direction, TrainMode

_EPOCHS_MAX = 10_000
_BATCH_MAX = 4_096
_MAX_LEN_MAX = 200


@dataclass(frozen=True)
class TrainConfig:
    mode: TrainMode = TrainMode.DUAL_ADV
    seed: int = 0

    # Weights of the adversarial term per direction.
    lambda_qr: float = 1.0
    lambda_rq: float = 1.0
    # Inner loop counts: discriminator and generator updates per batch.
    d: int = 1
    g: int = 1

    lr_gen: float = 0.5
    lr_disc: float = 0.2
    # 0 means plain SGD.
    momentum: float = 0.0
    clip: float = 5.0
    baseline_decay: float = 0.9
    lm_k: float = 1.0

    pretrain_epochs_gen: int = 5
    pretrain_epochs_disc: int = 2
    dal_epochs: int = 10
    batch_size: int = 16
    max_len: int = 20

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TrainMode(self.mode))
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.lambda_qr < 0 or self.lambda_rq < 0:
            raise ValueError("lambda weights must be >= 0")
        if self.mode.uses_adversarial and (self.d < 1 or self.g < 1):
            raise ValueError("d and g must be >= 1 when adversarial training is enabled")
        if self.d < 0 or self.g < 1:
            raise ValueError("d must be >= 0 and g >= 1")
        if self.lr_gen < 0 or self.lr_disc < 0:
            raise ValueError("learning rates must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not self.clip > 0:
            raise ValueError("clip must be > 0")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ValueError("baseline_decay must be in [0, 1)")
        if not self.lm_k > 0:
            raise ValueError("lm_k must be > 0")
        for name in ("pretrain_epochs_gen", "pretrain_epochs_disc", "dal_epochs"):
            if not 0 <= getattr(self, name) <= _EPOCHS_MAX:
                raise ValueError(f"{name} must be in [0, {_EPOCHS_MAX}]")
        if not 1 <= self.batch_size <= _BATCH_MAX:
            raise ValueError(f"batch_size must be in [1, {_BATCH_MAX}]")
        if not 1 <= self.max_len <= _MAX_LEN_MAX:
            raise ValueError(f"max_len must be in [1, {_MAX_LEN_MAX}]")

    def lambda_for(self, direction: Direction) -> float:
        return self.lambda_qr if direction == Direction.QR else self.lambda_rq
