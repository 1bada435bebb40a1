from __future__ import annotations

import itertools
import logging
import os
import re
from contextlib import suppress
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

_tmp_seq = itertools.count()

_system_name_strip_re = re.compile(r"[^0-9A-Za-z._-]+")

RESOLVED_CONFIG_NAME = "resolved-config.txt"
LOG_FILE_NAME = "dal.log"


def _tmp_suffix() -> str:
    return f".{os.getpid()}_{next(_tmp_seq)}.tmp"


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    # Unique temp name so concurrent writers never share a temp file.
    tmp = path.with_suffix(path.suffix + _tmp_suffix())
    try:
        tmp.write_bytes(data)
        tmp.replace(path)
    finally:
        with suppress(Exception):
            if tmp.exists():
                tmp.unlink()


def atomic_write_text(path: Path, content: str) -> None:
    atomic_write_bytes(path, content.encode("utf-8"))


def safe_system_name(name: str) -> str:
    base = _system_name_strip_re.sub("_", (name or "").strip())
    return base[:80] or "system"


@dataclass(frozen=True)
class RunLayout:
    """File names inside one training run directory."""

    root: Path

    @property
    def final_checkpoint(self) -> Path:
        return self.root / "final.ckpt"

    @property
    def last_checkpoint(self) -> Path:
        return self.root / "last.ckpt"

    @property
    def train_log(self) -> Path:
        return self.root / "train-log.json"

    @property
    def resolved_config(self) -> Path:
        return self.root / RESOLVED_CONFIG_NAME


@dataclass(frozen=True)
class ReportLayout:
    """File names inside one evaluation/bench output directory."""

    root: Path

    @property
    def report_text(self) -> Path:
        return self.root / "report.txt"

    @property
    def report_json(self) -> Path:
        return self.root / "report.json"

    @property
    def rubric(self) -> Path:
        return self.root / "annotation-rubric.txt"

    @property
    def bench_json(self) -> Path:
        return self.root / "bench.json"

    @property
    def resolved_config(self) -> Path:
        return self.root / RESOLVED_CONFIG_NAME

    def responses(self, system: str) -> Path:
        return self.root / f"responses.{safe_system_name(system)}.txt"
