from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from dal_dialogue.autodiff.primitives import add, embedding, matmul, mul, sigmoid, subtract, tanh
from dal_dialogue.autodiff.tensor import Tensor, constant
from dal_dialogue.errors import NonFiniteError, ShapeError
from dal_dialogue.nets.config import ModelDims
from dal_dialogue.text.vocab import PAD_ID, TokenSeq, check_ids

_EMBED_SCALE = 0.1


@dataclass
class ParamSet:
    """Named parameter tensors of one network; names double as checkpoint member names."""

    dims: ModelDims
    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors.items()}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self.tensors.items():
            arr = arrays[k]
            if arr.shape != t.data.shape:
                raise ShapeError("restore", t.data.shape, arr.shape, detail=k)
            t.data[...] = arr
            t.grad = None

    def check_finite(self) -> None:
        for k, t in self.tensors.items():
            if not np.isfinite(t.data).all():
                raise NonFiniteError(f"parameter {k} is non-finite")


def uniform(rng: np.random.Generator, shape: tuple[int, ...], scale: float) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


def init_embedding(rng: np.random.Generator, vocab_size: int, dim: int, name: str) -> dict[str, Tensor]:
    return {name: Tensor(uniform(rng, (vocab_size, dim), _EMBED_SCALE), name=name)}


def init_gru(rng: np.random.Generator, prefix: str, input_size: int, hidden: int) -> dict[str, Tensor]:
    s = 1.0 / np.sqrt(hidden)
    out: dict[str, Tensor] = {}
    for gate in ("z", "r", "h"):
        for key, shape in ((f"w_{gate}", (input_size, hidden)), (f"u_{gate}", (hidden, hidden))):
            name = f"{prefix}.{key}"
            out[name] = Tensor(uniform(rng, shape, s), name=name)
        name = f"{prefix}.b_{gate}"
        out[name] = Tensor(np.zeros((1, hidden)), name=name)
    return out


def gru_step(ps: ParamSet, prefix: str, x: Tensor, h: Tensor) -> Tensor:
    """One GRU update: h' = n + z * (h - n)."""

    def gate(g: str, hh: Tensor) -> Tensor:
        pre = add(matmul(x, ps[f"{prefix}.w_{g}"]), matmul(hh, ps[f"{prefix}.u_{g}"]))
        return add(pre, ps[f"{prefix}.b_{g}"])

    z = sigmoid(gate("z", h))
    r = sigmoid(gate("r", h))
    n = tanh(gate("h", mul(r, h)))
    return add(n, mul(z, subtract(h, n)))


@dataclass(frozen=True)
class Padded:
    ids: np.ndarray  # (B, T) int64, PAD-filled
    mask: np.ndarray  # (B, T) float64, 1.0 on real tokens

    @property
    def batch(self) -> int:
        return int(self.ids.shape[0])

    @property
    def steps(self) -> int:
        return int(self.ids.shape[1])


def pad_batch(seqs: Sequence[TokenSeq], vocab_size: int, *, what: str = "sequence") -> Padded:
    if not seqs:
        raise ValueError("batch must be non-empty")
    width = max(1, max(len(s) for s in seqs))
    ids = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), width))
    for i, s in enumerate(seqs):
        check_ids(s, vocab_size, what=what)
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return Padded(ids=ids, mask=mask)


def encode_padded(ps: ParamSet, emb_name: str, prefix: str, batch: Padded) -> tuple[list[Tensor], Tensor]:
    """Run a GRU over a padded batch.

    Returns the per-position states and the state after each row's last real token;
    padded positions carry the previous state forward unchanged.
    """

    h = constant(np.zeros((batch.batch, ps.dims.hidden)))
    states: list[Tensor] = []
    for t in range(batch.steps):
        x = embedding(ps[emb_name], batch.ids[:, t])
        h_new = gru_step(ps, prefix, x, h)
        m = batch.mask[:, t : t + 1]
        # Rows past their length keep h exactly; real positions take h_new exactly.
        h = h_new if m.all() else add(mul(constant(m), h_new), mul(constant(1.0 - m), h))
        states.append(h)
    return states, h


def feed_forward(ps: ParamSet, prefix: str, x: Tensor) -> Tensor:
    return add(matmul(x, ps[f"{prefix}.w"]), ps[f"{prefix}.b"])


def init_linear(rng: np.random.Generator, prefix: str, fan_in: int, fan_out: int) -> dict[str, Tensor]:
    s = 1.0 / np.sqrt(fan_in)
    return {
        f"{prefix}.w": Tensor(uniform(rng, (fan_in, fan_out), s), name=f"{prefix}.w"),
        f"{prefix}.b": Tensor(np.zeros((1, fan_out)), name=f"{prefix}.b"),
    }
