from __future__ import annotations

import numpy as np
import pytest

from dal_dialogue.autodiff.primitives import (
    PrimitiveKind,
    apply_primitive,
    backward,
    log_sigmoid_pair,
    matmul,
    scale,
    sigmoid,
    softmax,
    tanh,
    tsum,
)
from dal_dialogue.autodiff.tensor import Tensor, active_record, no_record, record
from dal_dialogue.errors import NonFiniteError, ShapeError, UnknownPrimitiveError


def test_softmax_of_equal_row_is_uniform() -> None:
    for v in (-7.5, 0.0, 3.0, 250.0):
        out = softmax(Tensor([[v, v, v, v]]))
        assert np.array_equal(out.data, np.full((1, 4), 0.25))


def test_softmax_rows_are_distributions() -> None:
    rng = np.random.default_rng(0)
    out = softmax(Tensor(rng.normal(scale=5.0, size=(6, 9))))
    assert (out.data >= 0).all()
    assert np.abs(out.data.sum(axis=-1) - 1.0).max() < 1e-12


def test_sigmoid_and_tanh_identity_points() -> None:
    assert sigmoid(Tensor([0.0])).item() == 0.5
    assert tanh(Tensor([0.0])).item() == 0.0


def test_matmul_with_identity() -> None:
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    out = matmul(a, Tensor(np.eye(2)))
    assert np.array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])


def test_shape_mismatch_names_primitive_and_shapes() -> None:
    with pytest.raises(ShapeError) as exc:
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    msg = str(exc.value)
    assert "matrix-multiply" in msg
    assert "(2, 3)" in msg
    assert exc.value.primitive == PrimitiveKind.MATMUL


def test_unknown_primitive_tag() -> None:
    with pytest.raises(UnknownPrimitiveError):
        apply_primitive("convolution", [Tensor([1.0])])


def test_non_finite_output_is_an_error() -> None:
    with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
        scale(Tensor([1e308]), 10.0)


def test_record_is_topological_and_scoped() -> None:
    x = Tensor(np.ones((2, 2)))
    assert active_record() is None
    with record() as rec:
        y = tanh(matmul(x, x))
        tsum(scale(y, 2.0))
        with no_record():
            sigmoid(x)
    assert active_record() is None
    assert len(rec) == 4

    produced_at = {app.output.node_id: i for i, app in enumerate(rec.entries)}
    for i, app in enumerate(rec.entries):
        for t in app.inputs:
            assert produced_at.get(t.node_id, -1) < i


def test_backward_linear_scale() -> None:
    x = Tensor([1.0, -2.0, 5.0])
    with record() as rec:
        loss = tsum(scale(x, 3.0))
    backward(loss, rec)
    assert x.grad is not None
    assert np.array_equal(x.grad, [3.0, 3.0, 3.0])


def test_backward_sigmoid_at_zero() -> None:
    x = Tensor(np.zeros(4))
    with record() as rec:
        loss = tsum(sigmoid(x))
    backward(loss, rec)
    assert x.grad is not None
    assert np.array_equal(x.grad, np.full(4, 0.25))


def test_backward_linear_chain_is_matrix_product() -> None:
    rng = np.random.default_rng(3)
    a = Tensor(rng.normal(size=(2, 3)))
    b = Tensor(rng.normal(size=(3, 4)))
    w = rng.normal(size=(2, 4))
    with record() as rec:
        loss = tsum(apply_primitive(PrimitiveKind.MUL, [matmul(a, b), Tensor(w)]))
    backward(loss, rec)
    assert a.grad is not None and b.grad is not None
    np.testing.assert_allclose(a.grad, w @ b.data.T, rtol=0, atol=1e-12)
    np.testing.assert_allclose(b.grad, a.data.T @ w, rtol=0, atol=1e-12)


def test_backward_unreachable_outputs_get_zero_grad() -> None:
    x = Tensor([1.0, 2.0])
    with record() as rec:
        side = tanh(x)
        loss = tsum(scale(x, 2.0))
    backward(loss, rec)
    assert side.grad is not None
    assert np.array_equal(side.grad, [0.0, 0.0])


def test_backward_accumulates_into_leaves() -> None:
    x = Tensor([1.0, 1.0])
    for factor in (2.0, 5.0):
        with record() as rec:
            loss = tsum(scale(x, factor))
        backward(loss, rec)
    assert x.grad is not None
    assert np.array_equal(x.grad, [7.0, 7.0])


def test_backward_rejects_non_scalar_loss() -> None:
    x = Tensor([1.0, 2.0])
    with record() as rec:
        y = scale(x, 2.0)
    with pytest.raises(ShapeError):
        backward(y, rec)


def test_backward_rejects_foreign_loss() -> None:
    x = Tensor([1.0, 2.0])
    with record():
        loss = tsum(x)
    with record() as other:
        tsum(x)
    with pytest.raises(ValueError):
        backward(loss, other)


def test_log_sigmoid_pair_matches_closed_form() -> None:
    z = np.array([[-3.0], [0.0], [2.5]])
    pos, neg = log_sigmoid_pair(Tensor(z))
    s = 1.0 / (1.0 + np.exp(-z))
    np.testing.assert_allclose(pos.data, np.log(s), rtol=1e-12)
    np.testing.assert_allclose(neg.data, np.log(1.0 - s), rtol=1e-12)
