from __future__ import annotations

import io
import json
import logging
import zipfile
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import numpy as np

from dal_dialogue.errors import CheckpointError
from dal_dialogue.lm.bigram import BigramLM
from dal_dialogue.nets.config import ModelDims
from dal_dialogue.paths import atomic_write_bytes
from dal_dialogue.states import Direction
from dal_dialogue.text.vocab import Vocab
from dal_dialogue.training.config import TrainConfig
from dal_dialogue.training.model import DalModel, RewardBaseline, build_model

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

_META = "meta.json"
# ZIP cannot store dates before 1980; a fixed stamp keeps archives byte-identical.
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr, dtype=np.float64), allow_pickle=False)
    return buf.getvalue()


def _member(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def checkpoint_bytes(model: DalModel) -> bytes:
    meta: dict[str, Any] = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": {**asdict(model.config), "mode": str(model.config.mode)},
        "dims": asdict(model.dims),
        "vocab": list(model.vocab.tokens),
        "lm_q": None if model.lm_q is None else model.lm_q.to_dict(),
        "lm_r": None if model.lm_r is None else model.lm_r.to_dict(),
        "baselines": {str(d): {"value": b.value, "decay": b.decay} for d, b in sorted(model.baselines.items())},
        "epoch": model.epoch,
        "components": {name: list(ps) for name, ps in model.components().items()},
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _member(zf, _META, json.dumps(meta, ensure_ascii=False, indent=2, sort_keys=True).encode("utf-8"))
        for name, ps in model.components().items():
            for param in ps:
                _member(zf, f"{name}/{param}.npy", _npy_bytes(ps[param].data))
    return buf.getvalue()


def save_checkpoint(model: DalModel, path: Path) -> Path:
    atomic_write_bytes(path, checkpoint_bytes(model))
    logger.info("checkpoint written: %s (epoch %d)", path, model.epoch)
    return path


def _dataclass_kwargs(cls: type, raw: dict[str, Any]) -> dict[str, Any]:
    known = {f.name for f in fields(cls)}
    return {k: v for k, v in raw.items() if k in known}


def load_checkpoint(path: Path) -> DalModel:
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read(_META).decode("utf-8"))
            if not isinstance(meta, dict):
                raise CheckpointError(f"{path}: meta.json is not an object")
            version = meta.get("format_version")
            if version != CHECKPOINT_FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: checkpoint format version {version!r}, expected {CHECKPOINT_FORMAT_VERSION}",
                    found_version=version if isinstance(version, int) else None,
                )
            model = _model_from_meta(meta)
            for name, ps in model.components().items():
                arrays = {p: np.load(io.BytesIO(zf.read(f"{name}/{p}.npy")), allow_pickle=False) for p in ps}
                ps.restore(arrays)
    except CheckpointError:
        raise
    except (OSError, KeyError, ValueError, TypeError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"cannot load checkpoint {path}: {e}") from e
    logger.info("checkpoint loaded: %s (epoch %d, mode %s)", path, model.epoch, model.config.mode)
    return model


def _model_from_meta(meta: dict[str, Any]) -> DalModel:
    vocab = Vocab(tokens=tuple(meta["vocab"]))
    dims = ModelDims(**_dataclass_kwargs(ModelDims, meta["dims"]))
    config = TrainConfig(**_dataclass_kwargs(TrainConfig, meta["config"]))
    model = build_model(vocab, dims, config)
    if meta.get("lm_q") is not None:
        model.lm_q = BigramLM.from_dict(meta["lm_q"])
    if meta.get("lm_r") is not None:
        model.lm_r = BigramLM.from_dict(meta["lm_r"])
    for d in Direction:
        raw = meta.get("baselines", {}).get(str(d))
        if raw is not None:
            model.baselines[d] = RewardBaseline(value=float(raw["value"]), decay=float(raw["decay"]))
    model.epoch = int(meta.get("epoch", 0))
    return model
