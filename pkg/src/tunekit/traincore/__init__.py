"""Desk-scale training engine: objective, optimizers, adapters, quantization.

Everything runs on 64-bit numpy. The "16-bit" in method names refers to
the memory model's accounting of a real deployment, not the arithmetic
used here.
"""

from .lomo import GradMeter, lomo_sgd_run, reference_sgd_run
from .lora import lora_forward, lora_merge
from .model import CharCodec, DenseLayer, LoraPair, ToyModel, init_toy_model
from .ops import cross_entropy, cross_entropy_grad, log_softmax, softmax
from .optim import AdamState, LionState, adam_step, lion_step, sgd_step
from .quant import QuantizedTensor, dequantize, quantize_rtn
from .train import TelemetryRecord, train_toy

__all__ = [
    "AdamState",
    "CharCodec",
    "DenseLayer",
    "GradMeter",
    "LionState",
    "LoraPair",
    "QuantizedTensor",
    "TelemetryRecord",
    "ToyModel",
    "adam_step",
    "cross_entropy",
    "cross_entropy_grad",
    "dequantize",
    "init_toy_model",
    "lion_step",
    "log_softmax",
    "lomo_sgd_run",
    "lora_forward",
    "lora_merge",
    "quantize_rtn",
    "reference_sgd_run",
    "sgd_step",
    "softmax",
    "train_toy",
]
