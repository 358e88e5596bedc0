"""Artifact generation: ARGS documents, launch commands, readme rendering.

Everything here is deterministic text generation; the golden-file tests
pin the exact bytes. File writes go through a temp-file rename so a
crashed writer never leaves a torn document.
"""

from __future__ import annotations

import base64
import json
import os
import shlex
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING

from .config import SCHEMA, TrainingConfig, from_document, to_document, validate
from .errors import EmptyInventory, InvariantViolation, ParseError
from .hardware import GIB, GpuInventory, summarize

if TYPE_CHECKING:
    from .planner import Plan

LAUNCH_PREFIX = "python -u -m deepspeed.launcher.launch --world_info="

# Fields that never become launch flags, and why. Kept next to the check
# that every schema field is either flagged or listed here.
LAUNCH_IRRELEVANT = {
    "seed": "emitted by the command template itself (--seed)",
    "world": "encoded in the --world_info payload",
}


def write_args(cfg: TrainingConfig) -> bytes:
    """Serialize a config to the canonical ARGS.json bytes."""
    problems = validate(cfg)
    if problems:
        raise InvariantViolation(
            "config not launchable: " + "; ".join(problems)
        )
    doc = to_document(cfg)
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def read_args(data: bytes | str) -> TrainingConfig:
    """Parse ARGS document bytes back into a config.

    Accepts any well-formed document regardless of the file name it came
    from; unknown keys and foreign schema versions are rejected.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"ARGS document is not valid JSON: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("ARGS document must be a JSON object")
    return from_document(doc)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_args_file(cfg: TrainingConfig, path: str | Path) -> Path:
    path = Path(path)
    _atomic_write(path, write_args(cfg))
    return path


def read_args_file(path: str | Path) -> TrainingConfig:
    return read_args(Path(path).read_bytes())


def world_info(inv: GpuInventory, host: str = "localhost") -> str:
    """Base64 of the host -> device-index map the launcher expects."""
    payload = json.dumps({host: [d.index for d in inv.devices]}, separators=(",", ":"))
    return base64.b64encode(payload.encode("ascii")).decode("ascii")


def _rope_flags(cfg: TrainingConfig) -> list[str]:
    spec = cfg.rope
    flags = ["--rope-kind", spec.kind.value]
    if spec.kind.value == "none":
        return flags
    flags += [
        "--rope-scale", str(spec.scale),
        "--rope-base", str(spec.base),
        "--rope-dim", str(spec.dim),
        "--rope-train-len", str(spec.train_len),
    ]
    if spec.kind.value == "ntk_v2":
        flags += ["--rope-ntk2-alpha", str(spec.ntk2_alpha),
                  "--rope-ntk2-beta", str(spec.ntk2_beta)]
    if spec.kind.value == "xpos":
        flags += ["--rope-xpos-gamma", str(spec.xpos_gamma)]
    return flags


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return str(value)
    return str(value)


def build_launch_command(cfg: TrainingConfig, inv: GpuInventory) -> str:
    """The deepspeed launcher invocation for this config on this machine.

    Flag pairs follow the config schema order. persona_name is omitted
    when unset; rope expands to its own flag group.
    """
    if not inv.devices:
        raise EmptyInventory("cannot build a launch command with no GPUs")
    problems = validate(cfg)
    if problems:
        raise InvariantViolation(
            "config not launchable: " + "; ".join(problems)
        )
    parts = [LAUNCH_PREFIX + world_info(inv), "main.py", "--seed", str(cfg.seed)]
    for spec in SCHEMA:
        if spec.launch_flag is None:
            continue
        if spec.name == "rope":
            parts.extend(_rope_flags(cfg))
            continue
        value = getattr(cfg, spec.name)
        if spec.name == "persona_name" and value is None:
            continue
        if spec.name == "method":
            value = value.value
        parts.extend([spec.launch_flag, shlex.quote(_format_value(value))])
    return " ".join(parts)


# --------------------------------------------------------------------------
# Readme rendering
# --------------------------------------------------------------------------

def _layout_lines(plan: "Plan") -> list[str]:
    verdict = plan.verdict
    options = " or ".join(l.shorthand() for l in verdict.required_layouts)
    lines = [f"- Minimum GPU memory for this plan: {options}."]
    if verdict.feasible and verdict.satisfied_layout is not None:
        lines.append(
            f"- This machine satisfies the {verdict.satisfied_layout.shorthand()} option."
        )
    else:
        lines.append(
            "- No suitable GPUs were detected here; run the Training section "
            "on a machine meeting the requirement above."
        )
    return lines


def render_readme(plan: "Plan") -> str:
    """Markdown run document with the three fixed sections.

    The Training section embeds the exact launch command and the full
    ARGS document, so the readme alone is enough to reproduce the run.
    """
    cfg = plan.config
    launch = plan.launch
    if launch is None:
        # Portable plan: synthesize the command for the planned world
        # layout so the reader can run it on the target machine.
        from .hardware import parse_layout
        synthetic = parse_layout(cfg.world.shorthand())
        launch = build_launch_command(cfg, synthetic)
    args_text = write_args(cfg).decode("utf-8").rstrip("\n")

    lines = [f"# Fine-tuning {cfg.model}", ""]
    lines += ["## Environment Configuration", ""]
    lines += [
        "- Python 3.10 or newer with `tunekit` installed (`pip install tunekit`).",
        "- The `deepspeed` launcher available on PATH for the generated command.",
    ]
    lines += _layout_lines(plan)
    lines += [f"- Planned world: {cfg.world.shorthand()}.", ""]
    lines += ["## Model Processing", ""]
    lines += [
        f"- Base model: {cfg.model}.",
        f"- Method: {cfg.method.value} "
        f"({'all parameters train' if cfg.method.value in ('full16', 'lomo16') else 'adapters train, base frozen'}; "
        f"weights held at {cfg.quant_bits}-bit).",
        f"- Dataset: {cfg.dataset} in {cfg.data_mode} mode, sequences capped at "
        f"{cfg.max_length} tokens.",
    ]
    if cfg.persona_name:
        lines.append(
            f"- Identity records have the persona placeholder replaced with "
            f"\"{cfg.persona_name}\" before export."
        )
    if cfg.rope.kind.value != "none":
        lines.append(
            f"- Position embedding scaling: {cfg.rope.kind.value} at scale "
            f"{cfg.rope.scale:g} over a trained length of {cfg.rope.train_len}."
        )
    lines += ["", "## Training", ""]
    if plan.rationale:
        lines += ["Plan rationale:", ""]
        lines += [f"- {line}" for line in plan.rationale]
        lines += [""]
    lines += ["Launch with:", "", "```bash", launch, "```", ""]
    lines += ["The full configuration (`ARGS.json`):", "", "```json", args_text, "```", ""]
    lines += [
        "Telemetry (step, loss, learning rate, cumulative tokens) is appended to "
        "`runs/<run_id>/telemetry.jsonl` as the run progresses.",
    ]
    return "\n".join(lines) + "\n"


def _unflagged_fields() -> list[str]:
    missing = []
    for spec in SCHEMA:
        if spec.launch_flag is None and spec.name not in LAUNCH_IRRELEVANT:
            missing.append(spec.name)
    return missing


assert not _unflagged_fields(), _unflagged_fields()


def gpu_summary(inv: GpuInventory) -> str:
    return summarize(inv)
