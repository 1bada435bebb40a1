from __future__ import annotations

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

from dal_dialogue.paths import LOG_FILE_NAME

_file_handler_log_files: set[Path] = set()

_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def parse_level(raw: str) -> int:
    name = str(raw or "").strip().upper()
    if name not in _LEVELS:
        raise ValueError(f"log level must be one of {', '.join(_LEVELS)}")
    return int(logging.getLevelName(name))


def configure_console_logging(level: str = "INFO") -> None:
    """Route records to stderr at ``level`` (idempotent: replaces our own stream handler)."""

    lvl = parse_level(level)
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, "_dal_console", False):
            root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler._dal_console = True  # type: ignore[attr-defined]
    handler.setLevel(lvl)
    handler.setFormatter(logging.Formatter(fmt=_FORMAT, datefmt=_DATEFMT))
    root.addHandler(handler)
    root.setLevel(min(lvl, logging.INFO))


def ensure_file_logging(*, log_dir: Path, filename: str = LOG_FILE_NAME) -> Path:
    """Attach a rotating file handler to the root logger (idempotent)."""

    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = (log_dir / filename).resolve()

    if log_file in _file_handler_log_files:
        return log_file

    root = logging.getLogger()
    for h in root.handlers:
        if isinstance(h, logging.FileHandler) and Path(h.baseFilename).resolve() == log_file:
            _file_handler_log_files.add(log_file)
            return log_file

    handler = RotatingFileHandler(
        log_file,
        maxBytes=5 * 1024 * 1024,
        backupCount=3,
        encoding="utf-8",
    )
    handler.setLevel(logging.INFO)
    handler.setFormatter(logging.Formatter(fmt=_FORMAT, datefmt=_DATEFMT))
    root.addHandler(handler)
    _file_handler_log_files.add(log_file)
    if root.level > logging.INFO or root.level == logging.NOTSET:
        root.setLevel(logging.INFO)
    return log_file


def detach_file_logging(log_file: Path) -> None:
    """Close and remove the handler for ``log_file`` (used when a command finishes)."""

    target = log_file.resolve()
    root = logging.getLogger()
    for h in list(root.handlers):
        if isinstance(h, logging.FileHandler) and Path(h.baseFilename).resolve() == target:
            root.removeHandler(h)
            h.close()
    _file_handler_log_files.discard(target)
