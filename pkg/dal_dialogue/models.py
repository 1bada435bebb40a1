from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator

from dal_dialogue.states import DecoderKind, Direction, TrainMode


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SynthOptions(_Section):
    n_safe: int = Field(default=3, ge=1, le=1_000)
    m: int = Field(default=20, ge=1, le=1_000)
    n_diverse: int = Field(default=200, ge=1, le=100_000)
    alphabet: int = Field(default=50, ge=1, le=10_000)
    min_len: int = Field(default=4, ge=1, le=50)
    max_len: int = Field(default=7, ge=1, le=50)
    # Pairs held out of the written corpus as evaluation queries.
    holdout: int = Field(default=0, ge=0)


class ModelOptions(_Section):
    emb: int = Field(default=32, ge=1, le=1_024)
    hidden: int = Field(default=64, ge=1, le=1_024)
    ffn: int = Field(default=0, ge=0, le=1_024)


class DataOptions(_Section):
    max_len: int = Field(default=20, ge=0, le=200)
    min_count: int = Field(default=1, ge=1)
    max_vocab: int = Field(default=2_000, ge=5, le=50_000)


class TrainOptions(_Section):
    mode: TrainMode = TrainMode.DUAL_ADV
    lambda_qr: float = Field(default=1.0, ge=0.0)
    lambda_rq: float = Field(default=1.0, ge=0.0)
    d: int = Field(default=1, ge=0, le=100)
    g: int = Field(default=1, ge=1, le=100)
    lr_gen: float = Field(default=0.5, ge=0.0)
    lr_disc: float = Field(default=0.2, ge=0.0)
    momentum: float = Field(default=0.0, ge=0.0, lt=1.0)
    clip: float = Field(default=5.0, gt=0.0)
    baseline_decay: float = Field(default=0.9, ge=0.0, lt=1.0)
    lm_k: float = Field(default=1.0, gt=0.0)
    pretrain_epochs_gen: int = Field(default=5, ge=0, le=10_000)
    pretrain_epochs_disc: int = Field(default=2, ge=0, le=10_000)
    dal_epochs: int = Field(default=10, ge=0, le=10_000)
    batch_size: int = Field(default=16, ge=1, le=4_096)
    max_len: int = Field(default=20, ge=1, le=200)


class MmiOptions(_Section):
    anti_lm_weight: float = Field(default=0.5, ge=0.0)
    anti_lm_threshold: int = Field(default=5, ge=0)
    bidi_nbest: int = Field(default=5, ge=1, le=200)
    bidi_reverse_weight: float = Field(default=0.5, ge=0.0, le=1.0)


class EvalOptions(_Section):
    decoder: DecoderKind = DecoderKind.GREEDY
    beam_size: int = Field(default=5, ge=1, le=200)
    direction: Direction = Direction.QR
    # Decode length; unset means the checkpoint's train.max_len.
    max_len: int | None = Field(default=None, ge=1, le=200)
    workers: int = Field(default=1, ge=1, le=32)
    latency_repetitions: int = Field(default=1, ge=1, le=1_000)
    bench_repetitions: int = Field(default=10, ge=1, le=1_000)
    bench_nbest: list[int] = Field(default_factory=lambda: [5, 10, 20])

    @field_validator("bench_nbest", mode="before")
    @classmethod
    def _split_nbest(cls, v: object) -> object:
        if isinstance(v, str):
            return [int(x) for x in v.replace(" ", "").split(",") if x]
        return v

    @field_validator("bench_nbest")
    @classmethod
    def _check_nbest(cls, v: list[int]) -> list[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("bench_nbest must be a non-empty list of positive integers")
        return v


class PathOptions(_Section):
    corpus: str | None = None
    out: str | None = None
    checkpoint: str | None = None
    baseline_checkpoint: str | None = None
    queries: str | None = None
    reverse_queries: str | None = None
    layout: str | None = None
    resume: str | None = None


class RunConfig(_Section):
    seed: int = Field(default=0, ge=0)
    synth: SynthOptions = Field(default_factory=SynthOptions)
    data: DataOptions = Field(default_factory=DataOptions)
    model: ModelOptions = Field(default_factory=ModelOptions)
    train: TrainOptions = Field(default_factory=TrainOptions)
    mmi: MmiOptions = Field(default_factory=MmiOptions)
    eval: EvalOptions = Field(default_factory=EvalOptions)
    paths: PathOptions = Field(default_factory=PathOptions)
