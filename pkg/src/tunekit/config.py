"""The training configuration record and its field schema.

TrainingConfig is the canonical ARGS record: every tunable the wizard or
planner settles. The SCHEMA list is the single authority on field order,
text parsing for Set_ARGS, launch-command flags, and defaults; the emit
and assistant modules all consume it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Optional

from .errors import InvariantViolation, ParseError, TypeMismatch, UnknownKey
from .hardware import GIB, parse_layout
from .memory import GpuLayout, MethodKind
from .rope import RopeKind, RopeScalingSpec

SCHEMA_VERSION = 1

OPTIMIZERS = ("lion", "adam")
DATA_MODES = ("pretrain", "instruct")
ZERO_STAGES = (0, 1, 2, 3)
QUANT_BITS = (16, 8, 4)


@dataclass(frozen=True)
class TrainingConfig:
    model: str = ""
    method: MethodKind = MethodKind.FULL16
    seed: int = 1234
    epochs: int = 10
    lr: float = 1e-4
    optimizer: str = "lion"
    lora_rank: int = 8
    lora_alpha: float = 16.0
    quant_bits: int = 16
    zero_stage: int = 0
    dataset: str = ""
    data_mode: str = "instruct"
    persona_name: Optional[str] = None
    max_length: int = 2048
    rope: RopeScalingSpec = field(default_factory=RopeScalingSpec)
    world: GpuLayout = field(default_factory=lambda: GpuLayout(1, 24 * GIB))
    wandb: bool = False
    output_dir: str = "./output"


def required_quant_bits(method: MethodKind) -> int:
    return {MethodKind.LORA8: 8, MethodKind.LORA4: 4}.get(method, 16)


# --------------------------------------------------------------------------
# Field schema: order here is the serialization and launch-flag order.
# --------------------------------------------------------------------------

def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise TypeMismatch(f"expected an integer, got {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise TypeMismatch(f"expected a number, got {text!r}") from None


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise TypeMismatch(f"expected a boolean, got {text!r}")


def _parse_str(text: str) -> str:
    return text


def _parse_optional_str(text: str) -> Optional[str]:
    return None if text.strip().lower() in ("", "none", "null") else text


def _parse_method(text: str) -> MethodKind:
    try:
        return MethodKind(text.strip().lower())
    except ValueError:
        valid = ", ".join(m.value for m in MethodKind)
        raise TypeMismatch(f"method must be one of {valid}, got {text!r}") from None


def _parse_choice(choices: tuple, caster: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str):
        value = caster(text)
        if value not in choices:
            raise TypeMismatch(f"expected one of {choices}, got {text!r}")
        return value
    return parse


def _parse_world(text: str) -> GpuLayout:
    try:
        inv = parse_layout(text)
    except ParseError as e:
        raise TypeMismatch(str(e)) from None
    return GpuLayout(len(inv.devices), inv.devices[0].total_mem)


@dataclass(frozen=True)
class FieldSpec:
    """How one config field parses from text and serializes to a launch flag.

    launch_flag None marks the field launch-irrelevant; the reason lands in
    the schema docs (world is encoded in --world_info, seed is emitted by
    the command template itself).
    """

    name: str
    parse: Callable[[str], Any]
    launch_flag: Optional[str]
    required: bool = False


SCHEMA: tuple[FieldSpec, ...] = (
    FieldSpec("model", _parse_str, "--model", required=True),
    FieldSpec("method", _parse_method, "--method"),
    FieldSpec("seed", _parse_int, None),  # emitted by the launch template itself
    FieldSpec("epochs", _parse_int, "--epochs"),
    FieldSpec("lr", _parse_float, "--lr"),
    FieldSpec("optimizer", _parse_choice(OPTIMIZERS, str), "--optimizer"),
    FieldSpec("lora_rank", _parse_int, "--lora-rank"),
    FieldSpec("lora_alpha", _parse_float, "--lora-alpha"),
    FieldSpec("quant_bits", _parse_choice(QUANT_BITS, _parse_int), "--quant-bits"),
    FieldSpec("zero_stage", _parse_choice(ZERO_STAGES, _parse_int), "--zero-stage"),
    FieldSpec("dataset", _parse_str, "--dataset", required=True),
    FieldSpec("data_mode", _parse_choice(DATA_MODES, str), "--data-mode"),
    FieldSpec("persona_name", _parse_optional_str, "--persona-name"),
    FieldSpec("max_length", _parse_int, "--max-length"),
    FieldSpec("rope", None, "--rope-kind"),  # set via rope.* keys; one flag group
    FieldSpec("world", _parse_world, None),  # encoded in --world_info
    FieldSpec("wandb", _parse_bool, "--wandb"),
    FieldSpec("output_dir", _parse_str, "--output-dir"),
)

FIELD_ORDER = tuple(f.name for f in SCHEMA)
_SCHEMA_BY_NAME = {f.name: f for f in SCHEMA}

_ROPE_PARSERS: dict[str, Callable[[str], Any]] = {
    "kind": lambda t: RopeKind(t.strip().lower()),
    "scale": _parse_float,
    "base": _parse_float,
    "dim": _parse_int,
    "train_len": _parse_int,
    "ntk2_alpha": _parse_float,
    "ntk2_beta": _parse_float,
    "xpos_gamma": _parse_float,
}


def _check_invariants(cfg: TrainingConfig) -> None:
    """Field-level rules; presence of required fields is validate()'s job."""
    if cfg.epochs < 1:
        raise InvariantViolation("epochs: must be >= 1")
    if cfg.lr <= 0:
        raise InvariantViolation("lr: must be > 0")
    if cfg.lora_rank < 1:
        raise InvariantViolation("lora_rank: must be >= 1")
    if cfg.max_length < 1:
        raise InvariantViolation("max_length: must be >= 1")
    if cfg.quant_bits != required_quant_bits(cfg.method):
        raise InvariantViolation(
            f"quant_bits: method {cfg.method.value} requires "
            f"{required_quant_bits(cfg.method)}-bit, got {cfg.quant_bits}"
        )
    if cfg.optimizer not in OPTIMIZERS:
        raise InvariantViolation(f"optimizer: must be one of {OPTIMIZERS}")
    if cfg.data_mode not in DATA_MODES:
        raise InvariantViolation(f"data_mode: must be one of {DATA_MODES}")
    if cfg.zero_stage not in ZERO_STAGES:
        raise InvariantViolation(f"zero_stage: must be one of {ZERO_STAGES}")


def set_arg(cfg: TrainingConfig, key: str, value: str) -> TrainingConfig:
    """Return a new config with one field amended from its text form.

    The input config is never mutated. Rope fields use dotted keys
    ("rope.kind", "rope.scale", ...). Setting the method auto-syncs
    quant_bits; setting quant_bits to something the method forbids is an
    InvariantViolation.
    """
    key = key.strip()
    if key.startswith("rope."):
        sub = key[len("rope."):]
        if sub not in _ROPE_PARSERS:
            raise UnknownKey(f"unknown config key {key!r}")
        try:
            parsed = _ROPE_PARSERS[sub](value)
        except (ValueError, TypeMismatch):
            raise TypeMismatch(f"bad value {value!r} for {key}") from None
        try:
            new_rope = replace(cfg.rope, **{sub: parsed})
        except Exception as e:
            raise InvariantViolation(f"{key}: {e}") from None
        candidate = replace(cfg, rope=new_rope)
    else:
        spec = _SCHEMA_BY_NAME.get(key)
        if spec is None or spec.parse is None:
            raise UnknownKey(f"unknown config key {key!r}")
        parsed = spec.parse(value)
        candidate = replace(cfg, **{key: parsed})
        if key == "method":
            candidate = replace(candidate, quant_bits=required_quant_bits(parsed))
    _check_invariants(candidate)
    return candidate


def validate(cfg: TrainingConfig) -> list[str]:
    """Everything standing between this config and a launch.

    An empty list means launchable.
    """
    problems = []
    for spec in SCHEMA:
        if spec.required and not getattr(cfg, spec.name):
            problems.append(f"{spec.name}: required")
    try:
        _check_invariants(cfg)
    except InvariantViolation as e:
        problems.append(str(e))
    return problems


def to_document(cfg: TrainingConfig) -> dict:
    """Flat schema-ordered dict form (rope and world as nested objects)."""
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    for name in FIELD_ORDER:
        value = getattr(cfg, name)
        if name == "rope":
            doc["rope"] = {
                "kind": value.kind.value,
                "scale": value.scale,
                "base": value.base,
                "dim": value.dim,
                "train_len": value.train_len,
                "ntk2_alpha": value.ntk2_alpha,
                "ntk2_beta": value.ntk2_beta,
                "xpos_gamma": value.xpos_gamma,
            }
        elif name == "world":
            doc["world"] = {"count": value.count, "per_device_mem": value.per_device_mem}
        elif name == "method":
            doc["method"] = value.value
        else:
            doc[name] = value
    return doc


def from_document(doc: dict) -> TrainingConfig:
    """Inverse of to_document; rejects unknown keys and other versions."""
    if "schema_version" not in doc:
        from .errors import SchemaVersionMismatch
        raise SchemaVersionMismatch("document has no schema_version field")
    if doc["schema_version"] != SCHEMA_VERSION:
        from .errors import SchemaVersionMismatch
        raise SchemaVersionMismatch(
            f"schema_version {doc['schema_version']!r} != supported {SCHEMA_VERSION}"
        )
    known = set(FIELD_ORDER) | {"schema_version"}
    for key in doc:
        if key not in known:
            raise UnknownKey(f"unknown key {key!r} in ARGS document")

    kwargs: dict[str, Any] = {}
    for name in FIELD_ORDER:
        if name not in doc:
            continue
        value = doc[name]
        if name == "rope":
            rope_known = set(_ROPE_PARSERS)
            for key in value:
                if key not in rope_known:
                    raise UnknownKey(f"unknown key rope.{key!r} in ARGS document")
            kwargs["rope"] = RopeScalingSpec(
                kind=RopeKind(value["kind"]), scale=value["scale"], base=value["base"],
                dim=value["dim"], train_len=value["train_len"],
                ntk2_alpha=value["ntk2_alpha"], ntk2_beta=value["ntk2_beta"],
                xpos_gamma=value["xpos_gamma"],
            )
        elif name == "world":
            kwargs["world"] = GpuLayout(value["count"], value["per_device_mem"])
        elif name == "method":
            kwargs["method"] = MethodKind(value)
        else:
            kwargs[name] = value
    cfg = TrainingConfig(**kwargs)
    _check_invariants(cfg)
    return cfg


def config_fields() -> list[str]:
    """Settable keys, for prompts and docs (rope expands to dotted keys)."""
    keys = []
    for spec in SCHEMA:
        if spec.name == "rope":
            keys.extend(f"rope.{sub}" for sub in _ROPE_PARSERS)
        elif spec.parse is not None:
            keys.append(spec.name)
    return keys


assert set(FIELD_ORDER) == {f.name for f in fields(TrainingConfig)}
