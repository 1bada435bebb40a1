from __future__ import annotations

import sys
from pathlib import Path

import pytest

# Ensure the repo root (containing `dal_dialogue/`) is importable when pytest
# picks `tests/` as the rootdir (e.g., single-file runs).
REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run end-to-end training tests (minutes each).",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "slow: end-to-end training/acceptance runs on the synthetic corpus (requires --run-slow)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="slow test; pass --run-slow to run it")
    for item in items:
        if item.get_closest_marker("slow") is not None:
            item.add_marker(skip_slow)
