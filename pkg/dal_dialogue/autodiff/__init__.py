from dal_dialogue.autodiff.gradcheck import grad_check
from dal_dialogue.autodiff.optim import SGD, Momentum, optimizer_step
from dal_dialogue.autodiff.primitives import PrimitiveKind, apply_primitive, backward
from dal_dialogue.autodiff.tensor import ComputationRecord, Tensor, constant, no_record, record

__all__ = [
    "SGD",
    "ComputationRecord",
    "Momentum",
    "PrimitiveKind",
    "Tensor",
    "apply_primitive",
    "backward",
    "constant",
    "grad_check",
    "no_record",
    "optimizer_step",
    "record",
]
