from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Protocol

import numpy as np

from dal_dialogue.autodiff.tensor import Tensor
from dal_dialogue.errors import GradientMissingError, NonFiniteError

DEFAULT_CLIP = 5.0


class UpdateRule(Protocol):
    def apply(self, params: Sequence[Tensor], lr: float, grad_scale: float) -> None: ...

    def state(self) -> dict[int, np.ndarray]: ...

    def load_state(self, state: dict[int, np.ndarray]) -> None: ...


class SGD:
    def apply(self, params: Sequence[Tensor], lr: float, grad_scale: float) -> None:
        step = lr * grad_scale
        for p in params:
            assert p.grad is not None
            p.data -= step * p.grad

    def state(self) -> dict[int, np.ndarray]:
        return {}

    def load_state(self, state: dict[int, np.ndarray]) -> None:
        pass


class Momentum:
    """Heavy-ball momentum; velocities are keyed by tensor identity."""

    def __init__(self, beta: float = 0.9) -> None:
        if not 0.0 <= beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        self.beta = beta
        self._velocity: dict[int, np.ndarray] = {}

    def apply(self, params: Sequence[Tensor], lr: float, grad_scale: float) -> None:
        for p in params:
            assert p.grad is not None
            v = self._velocity.get(p.node_id)
            g = grad_scale * p.grad
            v = g if v is None else self.beta * v + g
            self._velocity[p.node_id] = v
            p.data -= lr * v

    def state(self) -> dict[int, np.ndarray]:
        return {k: v.copy() for k, v in self._velocity.items()}

    def load_state(self, state: dict[int, np.ndarray]) -> None:
        self._velocity = {k: v.copy() for k, v in state.items()}


def global_grad_norm(params: Sequence[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def optimizer_step(
    params: Sequence[Tensor],
    lr: float,
    clip: float = DEFAULT_CLIP,
    rule: UpdateRule | None = None,
) -> float:
    """Clip the global gradient norm to ``clip`` and apply ``rule`` (SGD by default).

    Returns the pre-clip gradient norm. Gradients are zeroed afterwards.
    """

    if lr < 0:
        raise ValueError("lr must be >= 0")
    if not clip > 0:
        raise ValueError("clip must be > 0")
    missing = [p for p in params if p.grad is None]
    if missing:
        raise GradientMissingError(f"{len(missing)} parameter(s) have no gradient, e.g. {missing[0]!r}")

    norm = global_grad_norm(params)
    grad_scale = clip / norm if norm > clip else 1.0
    (rule or SGD()).apply(params, lr, grad_scale)

    for p in params:
        if not np.isfinite(p.data).all():
            raise NonFiniteError(f"parameter {p!r} became non-finite after update")
        p.zero_grad()
    return norm
