from __future__ import annotations

import pytest

from tunekit.errors import ParseError
from tunekit.hardware import (
    GIB,
    MIB,
    GpuDevice,
    GpuInventory,
    parse_layout,
    parse_probe,
    probe_inventory,
    summarize,
)


def test_parse_probe_nvidia_csv():
    text = (
        "0, NVIDIA RTX A6000, 49140, 48000\n"
        "1, NVIDIA RTX A6000, 49140, 47000\n"
    )
    inv = parse_probe(text)
    assert len(inv.devices) == 2
    assert inv.devices[0].name == "NVIDIA RTX A6000"
    assert inv.devices[0].total_mem == 49140 * MIB
    assert inv.devices[1].free_mem == 47000 * MIB


def test_parse_probe_empty_is_empty_inventory():
    assert parse_probe("") == GpuInventory(devices=())
    assert parse_probe("\n\n") == GpuInventory(devices=())


def test_parse_probe_bad_line_reports_line_number():
    with pytest.raises(ParseError) as err:
        parse_probe("0, A6000, 49140, 48000\nnot a line\n")
    assert "line 2" in str(err.value)


def test_parse_probe_wrong_field_count():
    with pytest.raises(ParseError):
        parse_probe("0, A6000, 49140\n")


def test_parse_layout_shorthand():
    inv = parse_layout("2x48 GB")
    assert len(inv.devices) == 2
    assert all(d.total_mem == 48 * GIB for d in inv.devices)
    assert all(d.free_mem == d.total_mem for d in inv.devices)


def test_parse_layout_single_device():
    inv = parse_layout("24 GB")
    assert len(inv.devices) == 1
    assert inv.devices[0].total_mem == 24 * GIB


def test_parse_layout_tolerates_spacing_and_case():
    assert parse_layout("4 x 80 gb") == parse_layout("4x80 GB")


def test_parse_layout_rejects_garbage():
    for bad in ("", "two gpus", "0x48 GB", "48"):
        with pytest.raises(ParseError):
            parse_layout(bad)


def test_device_indices_must_be_contiguous():
    with pytest.raises(ValueError):
        GpuInventory(devices=(
            GpuDevice(index=0, name="a", total_mem=GIB, free_mem=GIB),
            GpuDevice(index=2, name="b", total_mem=GIB, free_mem=GIB),
        ))


def test_summarize_formats():
    assert summarize(GpuInventory(devices=())) == "No GPUs detected"
    text = summarize(parse_layout("2x48 GB"))
    assert text.startswith("2 GPUs:")
    assert "[0] 48 GiB free / 48 GiB" in text


def test_probe_inventory_failure_yields_empty(monkeypatch):
    monkeypatch.setenv("TUNEKIT_GPU_PROBE", "false")
    assert probe_inventory() == GpuInventory(devices=())
    monkeypatch.setenv("TUNEKIT_GPU_PROBE", "definitely-not-a-command-xyz")
    assert probe_inventory() == GpuInventory(devices=())


def test_probe_inventory_env_override(monkeypatch, tmp_path):
    script = tmp_path / "fake_probe.sh"
    script.write_text("#!/bin/sh\necho '0, Fake GPU, 24576, 24000'\n")
    script.chmod(0o755)
    monkeypatch.setenv("TUNEKIT_GPU_PROBE", str(script))
    inv = probe_inventory()
    assert len(inv.devices) == 1
    assert inv.devices[0].total_mem == 24576 * MIB
