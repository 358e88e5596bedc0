"""tunekit: a training-plan compiler and desk-scale verification kit.

The package turns "what do you want to tune, on what hardware" into a
validated configuration, a launch command, and a run document, then
proves the training math (objective, optimizers, adapters, quantization,
position scaling) at desk scale with full telemetry.
"""

from .config import TrainingConfig, set_arg, validate
from .errors import TunekitError
from .hardware import GpuInventory, parse_layout, probe_inventory
from .memory import MethodKind, check_feasible, min_layouts
from .planner import Plan, Requirements, recommend
from .registry import SizeBucket, list_datasets, list_models, resolve_model

__version__ = "0.1.0"

__all__ = [
    "GpuInventory",
    "MethodKind",
    "Plan",
    "Requirements",
    "SizeBucket",
    "TrainingConfig",
    "TunekitError",
    "check_feasible",
    "list_datasets",
    "list_models",
    "min_layouts",
    "parse_layout",
    "probe_inventory",
    "recommend",
    "resolve_model",
    "set_arg",
    "validate",
]
