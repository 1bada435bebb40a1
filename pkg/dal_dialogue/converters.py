from __future__ import annotations

from dal_dialogue.decoding.mmi import MmiConfig
from dal_dialogue.models import MmiOptions, ModelOptions, SynthOptions, TrainOptions
from dal_dialogue.nets.config import ModelDims
from dal_dialogue.text.synthetic import SyntheticSpec
from dal_dialogue.training.config import TrainConfig


def _train_from_options(opts: TrainOptions, *, seed: int) -> TrainConfig:
    return TrainConfig(
        mode=opts.mode,
        seed=int(seed),
        lambda_qr=float(opts.lambda_qr),
        lambda_rq=float(opts.lambda_rq),
        d=int(opts.d),
        g=int(opts.g),
        lr_gen=float(opts.lr_gen),
        lr_disc=float(opts.lr_disc),
        momentum=float(opts.momentum),
        clip=float(opts.clip),
        baseline_decay=float(opts.baseline_decay),
        lm_k=float(opts.lm_k),
        pretrain_epochs_gen=int(opts.pretrain_epochs_gen),
        pretrain_epochs_disc=int(opts.pretrain_epochs_disc),
        dal_epochs=int(opts.dal_epochs),
        batch_size=int(opts.batch_size),
        max_len=int(opts.max_len),
    )


def _dims_from_options(opts: ModelOptions, *, vocab_size: int) -> ModelDims:
    return ModelDims(vocab_size=int(vocab_size), emb=int(opts.emb), hidden=int(opts.hidden), ffn=int(opts.ffn))


def _mmi_from_options(opts: MmiOptions) -> MmiConfig:
    return MmiConfig(
        anti_lm_weight=float(opts.anti_lm_weight),
        anti_lm_threshold=int(opts.anti_lm_threshold),
        bidi_nbest=int(opts.bidi_nbest),
        bidi_reverse_weight=float(opts.bidi_reverse_weight),
    )


def _synth_from_options(opts: SynthOptions) -> SyntheticSpec:
    return SyntheticSpec(
        n_safe=int(opts.n_safe),
        m=int(opts.m),
        n_diverse=int(opts.n_diverse),
        alphabet=int(opts.alphabet),
        min_len=int(opts.min_len),
        max_len=int(opts.max_len),
    )
