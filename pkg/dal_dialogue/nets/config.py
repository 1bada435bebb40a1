from __future__ import annotations

from dataclasses import dataclass

from dal_dialogue.text.vocab import NUM_RESERVED

_DIM_MIN = 1
_DIM_MAX = 1_024
_VOCAB_MAX = 50_000


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    emb: int = 32
    hidden: int = 64
    # Discriminator fully-connected width; 0 means "same as hidden".
    ffn: int = 0

    def __post_init__(self) -> None:
        if not NUM_RESERVED < self.vocab_size <= _VOCAB_MAX:
            raise ValueError(f"vocab_size must be in ({NUM_RESERVED}, {_VOCAB_MAX}]")
        for name in ("emb", "hidden"):
            v = getattr(self, name)
            if not _DIM_MIN <= v <= _DIM_MAX:
                raise ValueError(f"{name} must be in [{_DIM_MIN}, {_DIM_MAX}]")
        if not 0 <= self.ffn <= _DIM_MAX:
            raise ValueError(f"ffn must be in [0, {_DIM_MAX}]")

    @property
    def ffn_size(self) -> int:
        return self.ffn or self.hidden
