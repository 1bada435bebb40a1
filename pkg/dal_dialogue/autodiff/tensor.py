from __future__ import annotations

import itertools
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any

import numpy as np

_node_ids = itertools.count(1)


class Tensor:
    """Dense float64 array that can take part in a ComputationRecord.

    Leaf tensors (parameters, constants) are created directly; every other tensor
    is the output of apply_primitive(). ``grad`` is filled by backward().
    """

    __slots__ = ("data", "grad", "name", "node_id")

    def __init__(self, data: Any, *, name: str = "") -> None:
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name
        self.node_id = next(_node_ids)

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> Tensor:
        t = cls.__new__(cls)
        t.data = arr
        t.grad = None
        t.name = ""
        t.node_id = next(_node_ids)
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def values(self) -> np.ndarray:
        return self.data.reshape(-1)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor#{self.node_id}{label}(shape={self.shape})"


def constant(data: Any) -> Tensor:
    return Tensor(data, name="const")


@dataclass(frozen=True)
class Application:
    tag: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    saved: dict[str, Any] = field(default_factory=dict)


class ComputationRecord:
    """Ordered tape of primitive applications for one forward pass.

    Entries are appended in execution order, so every input of an entry was either
    a leaf or the output of an earlier entry.
    """

    def __init__(self) -> None:
        self.entries: list[Application] = []
        self._outputs: set[int] = set()

    def append(self, app: Application) -> None:
        self.entries.append(app)
        self._outputs.add(app.output.node_id)

    def produced(self, t: Tensor) -> bool:
        return t.node_id in self._outputs

    def tensors(self) -> Iterator[Tensor]:
        seen: set[int] = set()
        for app in self.entries:
            for t in (*app.inputs, app.output):
                if t.node_id not in seen:
                    seen.add(t.node_id)
                    yield t

    def __len__(self) -> int:
        return len(self.entries)


_ACTIVE: ContextVar[ComputationRecord | None] = ContextVar("dal_active_record", default=None)


def active_record() -> ComputationRecord | None:
    return _ACTIVE.get()


@contextmanager
def record() -> Iterator[ComputationRecord]:
    rec = ComputationRecord()
    token = _ACTIVE.set(rec)
    try:
        yield rec
    finally:
        _ACTIVE.reset(token)


@contextmanager
def no_record() -> Iterator[None]:
    token = _ACTIVE.set(None)
    try:
        yield
    finally:
        _ACTIVE.reset(token)
