from __future__ import annotations

from collections.abc import Sequence
from enum import StrEnum
from typing import Any

import numpy as np

from dal_dialogue.autodiff.tensor import Application, ComputationRecord, Tensor, active_record
from dal_dialogue.errors import NonFiniteError, ShapeError, UnknownPrimitiveError


class PrimitiveKind(StrEnum):
    MATMUL = "matrix-multiply"
    ADD = "add"
    MUL = "elementwise-multiply"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    SOFTMAX = "softmax"
    LOG_SOFTMAX = "log-softmax"
    CONCAT = "concatenate"
    EMBEDDING = "embedding-lookup"
    SUM = "sum"
    SCALE = "scalar-scale"


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""

    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _arity(tag: str, xs: Sequence[np.ndarray], n: int) -> None:
    if len(xs) != n:
        raise ShapeError(tag, *(x.shape for x in xs), detail=f"expected {n} input(s), got {len(xs)}")


class _Primitive:
    tag: str = ""

    def forward(self, xs: list[np.ndarray], attrs: dict[str, Any]) -> tuple[np.ndarray, dict[str, Any]]:
        raise NotImplementedError

    def backward(self, g: np.ndarray, xs: list[np.ndarray], y: np.ndarray, saved: dict[str, Any]) -> list[np.ndarray]:
        raise NotImplementedError


class _MatMul(_Primitive):
    tag = PrimitiveKind.MATMUL

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 2)
        a, b = xs
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(self.tag, a.shape, b.shape)
        return a @ b, {}

    def backward(self, g, xs, y, saved):
        a, b = xs
        return [g @ b.T, a.T @ g]


class _Add(_Primitive):
    tag = PrimitiveKind.ADD

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 2)
        a, b = xs
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError as e:
            raise ShapeError(self.tag, a.shape, b.shape) from e
        return a + b, {}

    def backward(self, g, xs, y, saved):
        a, b = xs
        return [_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)]


class _Mul(_Primitive):
    tag = PrimitiveKind.MUL

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 2)
        a, b = xs
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError as e:
            raise ShapeError(self.tag, a.shape, b.shape) from e
        return a * b, {}

    def backward(self, g, xs, y, saved):
        a, b = xs
        return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]


class _Sigmoid(_Primitive):
    tag = PrimitiveKind.SIGMOID

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        # tanh form never overflows and gives exactly 0.5 at 0.
        return 0.5 * (1.0 + np.tanh(0.5 * xs[0])), {}

    def backward(self, g, xs, y, saved):
        return [g * y * (1.0 - y)]


class _Tanh(_Primitive):
    tag = PrimitiveKind.TANH

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        return np.tanh(xs[0]), {}

    def backward(self, g, xs, y, saved):
        return [g * (1.0 - y * y)]


class _Softmax(_Primitive):
    tag = PrimitiveKind.SOFTMAX

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        x = xs[0]
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True), {}

    def backward(self, g, xs, y, saved):
        return [y * (g - (g * y).sum(axis=-1, keepdims=True))]


class _LogSoftmax(_Primitive):
    tag = PrimitiveKind.LOG_SOFTMAX

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        x = xs[0]
        shifted = x - x.max(axis=-1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True)), {}

    def backward(self, g, xs, y, saved):
        return [g - np.exp(y) * g.sum(axis=-1, keepdims=True)]


class _Concat(_Primitive):
    tag = PrimitiveKind.CONCAT

    def forward(self, xs, attrs):
        if not xs:
            raise ShapeError(self.tag, detail="no inputs")
        lead = xs[0].shape[:-1]
        for x in xs[1:]:
            if x.ndim != xs[0].ndim or x.shape[:-1] != lead:
                raise ShapeError(self.tag, xs[0].shape, x.shape)
        sizes = [x.shape[-1] for x in xs]
        return np.concatenate(xs, axis=-1), {"sizes": sizes}

    def backward(self, g, xs, y, saved):
        cuts = np.cumsum(saved["sizes"])[:-1]
        return list(np.split(g, cuts, axis=-1))


class _Embedding(_Primitive):
    tag = PrimitiveKind.EMBEDDING

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        weight = xs[0]
        ids = np.asarray(attrs.get("ids"), dtype=np.int64).reshape(-1)
        if weight.ndim != 2:
            raise ShapeError(self.tag, weight.shape, detail="weight must be 2-D")
        if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
            raise ShapeError(self.tag, weight.shape, (int(ids.max()),), detail="id out of range")
        return weight[ids], {"ids": ids}

    def backward(self, g, xs, y, saved):
        gw = np.zeros_like(xs[0])
        np.add.at(gw, saved["ids"], g)
        return [gw]


class _Sum(_Primitive):
    tag = PrimitiveKind.SUM

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        axis = attrs.get("axis")
        x = xs[0]
        if axis is not None and not -x.ndim <= int(axis) < x.ndim:
            raise ShapeError(self.tag, x.shape, detail=f"axis {axis} out of range")
        return x.sum(axis=axis, keepdims=True), {}

    def backward(self, g, xs, y, saved):
        return [np.broadcast_to(g, xs[0].shape).copy()]


class _Scale(_Primitive):
    tag = PrimitiveKind.SCALE

    def forward(self, xs, attrs):
        _arity(self.tag, xs, 1)
        factor = float(attrs.get("factor", 1.0))
        return xs[0] * factor, {"factor": factor}

    def backward(self, g, xs, y, saved):
        return [g * saved["factor"]]


PRIMITIVES: dict[str, _Primitive] = {
    p.tag: p
    for p in (
        _MatMul(),
        _Add(),
        _Mul(),
        _Sigmoid(),
        _Tanh(),
        _Softmax(),
        _LogSoftmax(),
        _Concat(),
        _Embedding(),
        _Sum(),
        _Scale(),
    )
}


def apply_primitive(tag: str, inputs: Sequence[Tensor], **attrs: Any) -> Tensor:
    prim = PRIMITIVES.get(str(tag))
    if prim is None:
        raise UnknownPrimitiveError(f"unknown primitive {tag!r}")
    xs = [t.data for t in inputs]
    out_data, saved = prim.forward(xs, attrs)
    if not np.isfinite(out_data).all():
        raise NonFiniteError(f"{prim.tag} produced non-finite values")
    out = Tensor._wrap(out_data)
    rec = active_record()
    if rec is not None:
        rec.append(Application(tag=prim.tag, inputs=tuple(inputs), output=out, saved=saved))
    return out


def backward(loss: Tensor, rec: ComputationRecord) -> None:
    """Populate ``grad`` of every tensor in ``rec`` with d(loss)/d(tensor).

    Outputs of the record get their gradient assigned; leaf tensors (parameters)
    accumulate into their existing ``grad`` so several losses can be summed before
    one optimizer step.
    """

    if loss.size != 1:
        raise ShapeError("backward", loss.shape, detail="loss must be a scalar")
    if not rec.produced(loss):
        raise ValueError("loss was not produced by the given record")

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    for app in reversed(rec.entries):
        g = grads.get(app.output.node_id)
        if g is None:
            continue
        prim = PRIMITIVES[app.tag]
        in_grads = prim.backward(g, [t.data for t in app.inputs], app.output.data, app.saved)
        for t, gi in zip(app.inputs, in_grads, strict=True):
            if not np.isfinite(gi).all():
                raise NonFiniteError(f"gradient of {app.tag} is non-finite")
            prev = grads.get(t.node_id)
            grads[t.node_id] = gi if prev is None else prev + gi

    for t in rec.tensors():
        g = grads.get(t.node_id)
        if rec.produced(t):
            t.grad = g if g is not None else np.zeros_like(t.data)
        elif t.grad is None:
            t.grad = g.copy() if g is not None else np.zeros_like(t.data)
        elif g is not None:
            t.grad = t.grad + g


# Composite helpers. Each one is expressed purely through the primitives above.


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.MATMUL, [a, b])


def add(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.ADD, [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.MUL, [a, b])


def sigmoid(x: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.SIGMOID, [x])


def tanh(x: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.TANH, [x])


def softmax(x: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.SOFTMAX, [x])


def log_softmax(x: Tensor) -> Tensor:
    return apply_primitive(PrimitiveKind.LOG_SOFTMAX, [x])


def concat(xs: Sequence[Tensor]) -> Tensor:
    return apply_primitive(PrimitiveKind.CONCAT, list(xs))


def embedding(weight: Tensor, ids: Sequence[int] | np.ndarray) -> Tensor:
    return apply_primitive(PrimitiveKind.EMBEDDING, [weight], ids=np.asarray(ids, dtype=np.int64))


def tsum(x: Tensor, axis: int | None = None) -> Tensor:
    return apply_primitive(PrimitiveKind.SUM, [x], axis=axis)


def scale(x: Tensor, factor: float) -> Tensor:
    return apply_primitive(PrimitiveKind.SCALE, [x], factor=factor)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def square(x: Tensor) -> Tensor:
    return mul(x, x)


def select_column(x: Tensor, j: int) -> Tensor:
    """Column ``j`` of a 2-D tensor as shape (rows, 1)."""

    onehot = np.zeros((x.shape[1], 1))
    onehot[j, 0] = 1.0
    return matmul(x, Tensor(onehot))


def log_sigmoid_pair(z: Tensor) -> tuple[Tensor, Tensor]:
    """Return (log sigmoid(z), log(1 - sigmoid(z))) for a (rows, 1) logit column."""

    zeros = Tensor(np.zeros(z.shape))
    lp = log_softmax(concat([zeros, z]))
    return select_column(lp, 1), select_column(lp, 0)
