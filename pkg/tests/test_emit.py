from __future__ import annotations

import base64
import json
import shlex
from pathlib import Path

import pytest

from tunekit import emit
from tunekit.config import TrainingConfig, set_arg
from tunekit.errors import (
    EmptyInventory,
    InvariantViolation,
    ParseError,
    SchemaVersionMismatch,
    UnknownKey,
)
from tunekit.hardware import GpuInventory, parse_layout
from tunekit.planner import Requirements, recommend

GOLDEN = Path(__file__).parent / "golden"


def _running_plan(inv, train_here=True):
    req = Requirements(domain="medical", language="en", train_here=train_here)
    return recommend(req, inv)


# ------------------------------------------------------------- golden files

def test_args_json_golden(inv_2x48):
    plan = _running_plan(inv_2x48)
    assert emit.write_args(plan.config) == (GOLDEN / "ARGS.json").read_bytes()


def test_launch_command_golden(inv_2x48):
    plan = _running_plan(inv_2x48)
    assert (plan.launch + "\n").encode() == (GOLDEN / "launch.txt").read_bytes()


def test_readme_golden(inv_2x48):
    plan = _running_plan(inv_2x48, train_here=False)
    assert plan.readme.encode() == (GOLDEN / "Readme.md").read_bytes()


def test_emission_is_deterministic(inv_2x48):
    a = _running_plan(inv_2x48)
    b = _running_plan(inv_2x48)
    assert emit.write_args(a.config) == emit.write_args(b.config)
    assert a.launch == b.launch
    ra = _running_plan(inv_2x48, train_here=False).readme
    rb = _running_plan(inv_2x48, train_here=False).readme
    assert ra == rb


# ------------------------------------------------------------- ARGS documents

def _complete_cfg(**overrides):
    cfg = TrainingConfig(model="Llama-7B", dataset="lima-en")
    for key, value in overrides.items():
        cfg = set_arg(cfg, key, value)
    return cfg


def test_write_args_requires_launchable_config():
    with pytest.raises(InvariantViolation) as e:
        emit.write_args(TrainingConfig())
    assert "model: required" in str(e.value)


def test_args_round_trip():
    cfg = _complete_cfg(method="lora4", persona_name="DrBot", epochs="3")
    data = emit.write_args(cfg)
    assert emit.read_args(data) == cfg
    doc = json.loads(data)
    assert doc["schema_version"] == 1
    assert doc["method"] == "lora4"
    assert doc["quant_bits"] == 4


def test_args_file_round_trip(tmp_path):
    cfg = _complete_cfg()
    path = emit.write_args_file(cfg, tmp_path / "deep" / "ARGS.json")
    assert path.is_file()
    assert emit.read_args_file(path) == cfg
    assert not list(path.parent.glob("ARGS.json.*"))  # no temp litter


def test_read_args_rejects_bad_documents():
    with pytest.raises(ParseError):
        emit.read_args(b"{not json")
    with pytest.raises(ParseError):
        emit.read_args(b"[1, 2]")
    doc = json.loads(emit.write_args(_complete_cfg()))
    doc["optimzer"] = "lion"
    with pytest.raises(UnknownKey) as e:
        emit.read_args(json.dumps(doc))
    assert "optimzer" in str(e.value)
    doc = json.loads(emit.write_args(_complete_cfg()))
    doc["schema_version"] = 99
    with pytest.raises(SchemaVersionMismatch):
        emit.read_args(json.dumps(doc))


# ------------------------------------------------------------- launch command

def test_world_info_payload_decodes(inv_2x48):
    encoded = emit.world_info(inv_2x48)
    assert encoded == "eyJsb2NhbGhvc3QiOlswLDFdfQ=="
    decoded = json.loads(base64.b64decode(encoded))
    assert decoded == {"localhost": [0, 1]}


def test_launch_command_shape(inv_2x48):
    cfg = _complete_cfg()
    cmd = emit.build_launch_command(cfg, inv_2x48)
    assert cmd.startswith(
        "python -u -m deepspeed.launcher.launch --world_info=eyJsb2NhbGhvc3QiOlswLDFdfQ== main.py --seed 1234 "
    )
    tokens = shlex.split(cmd)
    assert "--model" in tokens and tokens[tokens.index("--model") + 1] == "Llama-7B"
    assert tokens[tokens.index("--epochs") + 1] == "10"
    assert tokens[tokens.index("--wandb") + 1] == "false"
    # flags follow schema order
    flag_positions = [tokens.index(f) for f in ("--model", "--method", "--epochs",
                                                "--lr", "--dataset", "--output-dir")]
    assert flag_positions == sorted(flag_positions)


def test_launch_command_omits_unset_persona(inv_2x48):
    cmd = emit.build_launch_command(_complete_cfg(), inv_2x48)
    assert "--persona-name" not in cmd
    cmd = emit.build_launch_command(_complete_cfg(persona_name="Dr Bot"), inv_2x48)
    assert "--persona-name 'Dr Bot'" in cmd


def test_launch_command_quotes_shell_metacharacters(inv_2x48):
    cfg = _complete_cfg(output_dir="./runs; rm -rf /")
    cmd = emit.build_launch_command(cfg, inv_2x48)
    assert "'./runs; rm -rf /'" in cmd  # metacharacters stay quoted
    tokens = shlex.split(cmd)
    assert tokens[tokens.index("--output-dir") + 1] == "./runs; rm -rf /"


def test_launch_command_rope_flag_group(inv_2x48):
    cfg = _complete_cfg()
    cmd = emit.build_launch_command(cfg, inv_2x48)
    assert "--rope-kind none" in cmd
    assert "--rope-scale" not in cmd
    cfg = set_arg(set_arg(cfg, "rope.kind", "dynamic_ntk"), "rope.scale", "4")
    cmd = emit.build_launch_command(cfg, inv_2x48)
    assert "--rope-kind dynamic_ntk" in cmd
    assert "--rope-scale 4.0" in cmd
    assert "--rope-train-len 2048" in cmd
    assert "--rope-ntk2-alpha" not in cmd
    cfg = set_arg(cfg, "rope.kind", "ntk_v2")
    cmd = emit.build_launch_command(cfg, inv_2x48)
    assert "--rope-ntk2-alpha 1.0" in cmd and "--rope-ntk2-beta 32.0" in cmd


def test_launch_command_needs_devices():
    with pytest.raises(EmptyInventory):
        emit.build_launch_command(_complete_cfg(), GpuInventory(devices=()))


def test_launch_command_rejects_incomplete_config(inv_2x48):
    with pytest.raises(InvariantViolation):
        emit.build_launch_command(TrainingConfig(model="m"), inv_2x48)


def test_single_device_world_info():
    inv = parse_layout("24 GB")
    decoded = json.loads(base64.b64decode(emit.world_info(inv)))
    assert decoded == {"localhost": [0]}


# ------------------------------------------------------------- readme

def test_readme_sections_and_content(inv_2x48):
    plan = _running_plan(inv_2x48, train_here=False)
    readme = plan.readme
    for heading in ("# Fine-tuning Llama-7B",
                    "## Environment Configuration",
                    "## Model Processing",
                    "## Training"):
        assert heading in readme
    assert readme.index("## Environment Configuration") \
        < readme.index("## Model Processing") < readme.index("## Training")
    assert "```bash" in readme and "```json" in readme
    # the embedded ARGS document round-trips
    args_block = readme.split("```json\n")[1].split("\n```")[0]
    assert emit.read_args(args_block) == plan.config
    # the embedded launch command is runnable-shaped
    bash_block = readme.split("```bash\n")[1].split("\n```")[0]
    assert bash_block.startswith("python -u -m deepspeed.launcher.launch")


def test_readme_persona_and_rope_lines(inv_2x48):
    req = Requirements(domain="medical", language="en", train_here=False,
                       persona_name="DrBot", context_target=8192)
    plan = recommend(req, inv_2x48)
    assert '"DrBot"' in plan.readme
    assert "dynamic_ntk at scale 4" in "".join(plan.rationale)
    assert "dynamic_ntk" in plan.readme


def test_readme_for_infeasible_inventory():
    plan = recommend(
        Requirements(domain="medical", language="en"), GpuInventory(devices=()))
    assert "No suitable GPUs were detected here" in plan.readme
    assert "Minimum GPU memory for this plan: 8 GB." in plan.readme


def test_atomic_write_replaces_existing(tmp_path):
    target = tmp_path / "ARGS.json"
    emit.write_args_file(_complete_cfg(), target)
    first = target.read_bytes()
    emit.write_args_file(_complete_cfg(epochs="3"), target)
    second = target.read_bytes()
    assert first != second
    assert json.loads(second)["epochs"] == 3


def test_schema_launch_coverage():
    from tunekit.config import SCHEMA

    for spec in SCHEMA:
        assert spec.launch_flag is not None or spec.name in emit.LAUNCH_IRRELEVANT
