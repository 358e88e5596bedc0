from __future__ import annotations

import json

import pytest

from tunekit.hardware import parse_layout


@pytest.fixture
def inv_2x48():
    return parse_layout("2x48 GB")


@pytest.fixture
def inv_1x24():
    return parse_layout("24 GB")


@pytest.fixture
def memorizable_jsonl(tmp_path):
    """Ten short QA pairs with distinct prefixes, so a char model with an
    8-char context can drive the loss close to zero."""
    words = ["alpha", "bravo", "charlie", "delta", "echo",
             "foxtrot", "golf", "hotel", "india", "juliet"]
    path = tmp_path / "mem.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for i, w in enumerate(words):
            f.write(json.dumps({"input": f"Q{i} {w}?", "output": f"A{i} {w} indeed."}) + "\n")
    return path
