from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from dal_dialogue.autodiff.primitives import backward
from dal_dialogue.autodiff.tensor import Tensor, no_record, record
from dal_dialogue.errors import NonDeterministicError

# Entries whose gradients are both below this size are compared absolutely.
_REL_ERR_FLOOR = 1e-4


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), _REL_ERR_FLOOR)


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], epsilon: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences.

    ``f`` rebuilds the scalar loss from the current values of ``params`` each call.
    """

    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")

    with record() as rec:
        loss = f()
    with no_record():
        again = f()
    if not np.array_equal(loss.data, again.data):
        raise NonDeterministicError("f returned different values for identical parameters")

    for p in params:
        p.grad = None
    backward(loss, rec)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    with no_record():
        for p, a in zip(params, analytic, strict=True):
            flat = p.data.reshape(-1)
            a_flat = a.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + epsilon
                plus = f().item()
                flat[i] = orig - epsilon
                minus = f().item()
                flat[i] = orig
                numeric = (plus - minus) / (2.0 * epsilon)
                worst = max(worst, relative_error(float(a_flat[i]), numeric))
    for p in params:
        p.grad = None
    return worst
