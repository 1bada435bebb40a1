from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from dal_dialogue.errors import UsageError
from dal_dialogue.models import RunConfig

_ASSIGN_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?)\s*=\s*(.*?)\s*$")

_HEADER = "# dal_dialogue resolved run config (key = value)"


def _parse_assignment(line: str) -> tuple[str, str] | None:
    raw = str(line or "")
    stripped = raw.strip()
    if not stripped:
        return None
    if stripped.startswith("#"):
        return None
    m = _ASSIGN_RE.match(raw)
    if not m:
        raise UsageError(f"config line is not `key = value`: {stripped!r}")
    return m.group(1), m.group(2)


def _decode_value(raw: str) -> str:
    v = str(raw or "").strip()
    if not v:
        return ""
    if (v.startswith('"') and v.endswith('"')) or (v.startswith("'") and v.endswith("'")):
        return v[1:-1]
    return v


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for line in text.splitlines():
        parsed = _parse_assignment(line)
        if parsed is None:
            continue
        key, value = parsed
        values[key] = _decode_value(value)
    return values


def parse_override(item: str) -> tuple[str, str]:
    """``section.key=value`` from a ``--set`` flag."""

    parsed = _parse_assignment(item)
    if parsed is None:
        raise UsageError(f"--set needs key=value, got {item!r}")
    key, value = parsed
    return key, _decode_value(value)


def _nest(flat: Mapping[str, str]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        # An empty value means "unset": the field keeps its default.
        if value == "":
            continue
        section, _, name = key.partition(".")
        if not name:
            nested[section] = value
            continue
        slot = nested.setdefault(section, {})
        if not isinstance(slot, dict):
            raise UsageError(f"config key {section!r} is not a section")
        slot[name] = value
    return nested


def load_run_config(path: Path | None, overrides: Iterable[tuple[str, str]] = ()) -> RunConfig:
    """Config file values, then ``overrides`` in order; later assignments win."""

    flat: dict[str, str] = {}
    if path is not None:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot read config file {path}: {e}") from e
        flat.update(parse_config_text(text))
    for key, value in overrides:
        flat[key] = value
    try:
        return RunConfig.model_validate(_nest(flat))
    except ValidationError as e:
        raise UsageError(f"invalid config: {e}") from e


def _render_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def flatten_run_config(cfg: RunConfig) -> dict[str, str]:
    """Dotted key -> rendered value, in section order."""

    data = cfg.model_dump(mode="json")
    flat = {"seed": _render_value(data.pop("seed"))}
    for section in sorted(data):
        for name, value in data[section].items():
            flat[f"{section}.{name}"] = _render_value(value)
    return flat


def render_run_config(cfg: RunConfig) -> str:
    """Every field of ``cfg`` as ``key = value`` lines; ``load_run_config`` reads it back unchanged."""

    lines = [_HEADER]
    current = ""
    for key, value in flatten_run_config(cfg).items():
        section = key.partition(".")[0] if "." in key else ""
        if section != current:
            lines.append("")
            lines.append(f"# {section}")
            current = section
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
