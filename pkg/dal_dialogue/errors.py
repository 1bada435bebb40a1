from __future__ import annotations

from pathlib import Path


class DalError(RuntimeError):
    """Base class for every domain failure raised by dal_dialogue."""


class ShapeError(DalError):
    def __init__(self, primitive: str, *shapes: tuple[int, ...], detail: str = "") -> None:
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        msg = f"{primitive}: incompatible shapes {shown}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.primitive = primitive
        self.shapes = shapes


class UnknownPrimitiveError(DalError):
    pass


class NonFiniteError(DalError):
    pass


class GradientMissingError(DalError):
    pass


class NonDeterministicError(DalError):
    pass


class VocabError(DalError):
    pass


class CorpusError(DalError):
    pass


class CheckpointError(DalError):
    def __init__(self, message: str, *, found_version: int | None = None) -> None:
        super().__init__(message)
        self.found_version = found_version


class DivergenceError(DalError):
    def __init__(self, message: str, *, epoch: int, last_good_checkpoint: Path | None = None) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.last_good_checkpoint = last_good_checkpoint


class UsageError(DalError):
    pass
