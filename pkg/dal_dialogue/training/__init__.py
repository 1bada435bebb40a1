from dal_dialogue.training.checkpoint import CHECKPOINT_FORMAT_VERSION, load_checkpoint, save_checkpoint
from dal_dialogue.training.config import TrainConfig
from dal_dialogue.training.model import DalModel, RewardBaseline, build_model
from dal_dialogue.training.trainer import (
    combined_generator_step,
    dual_regularizer,
    dual_step,
    log_k,
    mean_dual,
    policy_gradient_step,
    pretrain,
    teacher_forcing_step,
    train_dal,
)
from dal_dialogue.training.trainlog import EpochRecord, TrainLog

__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "DalModel",
    "EpochRecord",
    "RewardBaseline",
    "TrainConfig",
    "TrainLog",
    "build_model",
    "combined_generator_step",
    "dual_regularizer",
    "dual_step",
    "load_checkpoint",
    "log_k",
    "mean_dual",
    "policy_gradient_step",
    "pretrain",
    "save_checkpoint",
    "teacher_forcing_step",
    "train_dal",
]
