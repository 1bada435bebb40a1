from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError

from dal_dialogue.errors import CheckpointError
from dal_dialogue.paths import atomic_write_text
from dal_dialogue.states import TrainMode, TrainPhase

_TRAIN_LOG_VERSION = 1


class EpochRecord(BaseModel):
    phase: TrainPhase
    epoch: int
    mode: TrainMode
    # Mean duality regularizer over the whole corpus at the end of the epoch.
    mean_dual: float | None = None
    mle_loss: dict[str, float] = Field(default_factory=dict)
    disc_loss: dict[str, float] = Field(default_factory=dict)
    reward: dict[str, float] = Field(default_factory=dict)
    baseline: dict[str, float] = Field(default_factory=dict)


class TrainLog(BaseModel):
    version: int = _TRAIN_LOG_VERSION
    records: list[EpochRecord] = Field(default_factory=list)

    def append(self, rec: EpochRecord) -> None:
        self.records.append(rec)

    def phase(self, phase: TrainPhase) -> list[EpochRecord]:
        return [r for r in self.records if r.phase == phase]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def write(self, path: Path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def read(cls, path: Path) -> TrainLog:
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            log = cls.model_validate(obj)
        except (OSError, json.JSONDecodeError, ValidationError) as e:
            raise CheckpointError(f"cannot read train log {path}: {e}") from e
        if log.version != _TRAIN_LOG_VERSION:
            raise CheckpointError(f"unsupported train log version {log.version}", found_version=log.version)
        return log
