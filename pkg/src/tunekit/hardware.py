"""GPU inventory: probing, parsing, and summarizing.

Acquisition is split from parsing so everything here stays pure and
testable without hardware: `probe_inventory` shells out to a configurable
probe command (default: the vendor CLI with a CSV query) and hands the
text to `parse_probe`.
"""

from __future__ import annotations

import os
import re
import subprocess
from dataclasses import dataclass

from .errors import ParseError

MIB = 2**20
GIB = 2**30

# Override with e.g. TUNEKIT_GPU_PROBE="cat /tmp/fake_gpus.csv"
PROBE_ENV_VAR = "TUNEKIT_GPU_PROBE"
DEFAULT_PROBE_CMD = (
    "nvidia-smi --query-gpu=index,name,memory.total,memory.free "
    "--format=csv,noheader,nounits"
)


@dataclass(frozen=True)
class GpuDevice:
    index: int
    name: str
    total_mem: int  # bytes
    free_mem: int   # bytes

    def __post_init__(self):
        if self.total_mem <= 0:
            raise ValueError("total_mem must be positive")
        if not 0 <= self.free_mem <= self.total_mem:
            raise ValueError("free_mem must lie in [0, total_mem]")


@dataclass(frozen=True)
class GpuInventory:
    devices: tuple[GpuDevice, ...] = ()
    host: str = "localhost"

    def __post_init__(self):
        indices = [d.index for d in self.devices]
        if indices != list(range(len(indices))):
            raise ValueError(f"device indices must be contiguous from 0, got {indices}")


def parse_probe(probe_output: str) -> GpuInventory:
    """Parse probe CSV lines "index, name, total_mib, free_mib".

    Empty input is a valid zero-device inventory. Any malformed line raises
    ParseError naming the line number; there is no partial-success path.
    """
    devices = []
    for lineno, raw in enumerate(probe_output.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"line {lineno}: expected 4 comma-separated fields, got {len(parts)}")
        idx_s, name, total_s, free_s = parts
        try:
            idx, total_mib, free_mib = int(idx_s), int(total_s), int(free_s)
        except ValueError as e:
            raise ParseError(f"line {lineno}: non-numeric field ({e})") from None
        try:
            devices.append(GpuDevice(idx, name, total_mib * MIB, free_mib * MIB))
        except ValueError as e:
            raise ParseError(f"line {lineno}: {e}") from None
    try:
        return GpuInventory(devices=tuple(devices))
    except ValueError as e:
        raise ParseError(str(e)) from None


_LAYOUT_RE = re.compile(r"^\s*(?:(\d+)\s*x\s*)?(\d+)\s*GB\s*$", re.IGNORECASE)


def parse_layout(shorthand: str) -> GpuInventory:
    """Build a synthetic inventory from "<count>x<gib> GB" or "<gib> GB".

    Synthetic devices report all memory as free. Marketing-GB labels are
    treated as GiB, matching how the feasibility table is calibrated.
    """
    m = _LAYOUT_RE.match(shorthand)
    if not m:
        raise ParseError(f"cannot parse GPU layout {shorthand!r} (want e.g. '2x48 GB' or '48 GB')")
    count = int(m.group(1)) if m.group(1) else 1
    gib = int(m.group(2))
    if count < 1:
        raise ParseError(f"device count must be >= 1, got {count}")
    if gib < 1:
        raise ParseError(f"per-device memory must be >= 1 GiB, got {gib}")
    mem = gib * GIB
    devices = tuple(
        GpuDevice(i, f"synthetic-{gib}GiB", mem, mem) for i in range(count)
    )
    return GpuInventory(devices=devices)


def _fmt_gib(nbytes: int) -> str:
    gib = nbytes / GIB
    return f"{gib:g}"


def summarize(inv: GpuInventory) -> str:
    """Deterministic one-line-per-device summary for humans and prompts."""
    if not inv.devices:
        return "No GPUs detected"
    parts = [
        f"[{d.index}] {_fmt_gib(d.free_mem)} GiB free / {_fmt_gib(d.total_mem)} GiB"
        for d in inv.devices
    ]
    return f"{len(inv.devices)} GPUs: " + ", ".join(parts)


def probe_inventory(probe_cmd: str | None = None, host: str = "localhost") -> GpuInventory:
    """Run the probe command and parse its output.

    A failing or missing probe yields an empty inventory rather than an
    error: no GPUs is an answer, not a crash.
    """
    cmd = probe_cmd or os.environ.get(PROBE_ENV_VAR) or DEFAULT_PROBE_CMD
    try:
        out = subprocess.run(
            cmd, shell=True, capture_output=True, text=True, timeout=10
        )
    except (OSError, subprocess.TimeoutExpired):
        return GpuInventory(host=host)
    if out.returncode != 0:
        return GpuInventory(host=host)
    inv = parse_probe(out.stdout)
    return GpuInventory(devices=inv.devices, host=host)
