"""The dry-run training loop: desk-scale, deterministic, telemetry out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..config import TrainingConfig
from ..datasets import DatasetSpec, frame_record
from ..errors import EmptyDataset
from ..memory import MethodKind
from .lomo import lomo_sgd_run
from .model import CharCodec, ToyModel, attach_adapters, init_toy_model, windows
from .optim import AdamState, LionState, adam_step, lion_step
from .quant import dequantize, quantize_rtn


@dataclass(frozen=True)
class TelemetryRecord:
    step: int
    loss: float
    lr: float
    tokens: int


Sink = Callable[[TelemetryRecord], None]

CONTEXT = 8
HIDDEN = 64


def _training_texts(ds: DatasetSpec) -> list[str]:
    texts = []
    for rec in ds.records:
        framed = frame_record(rec, ds.mode)
        texts.append(framed["input"] + framed["output"])
    return texts


def build_model(cfg: TrainingConfig, vocab: int) -> ToyModel:
    """Model + freeze/adapter/quantization wiring for cfg.method."""
    model = init_toy_model(
        vocab=vocab, context=CONTEXT, hidden=HIDDEN, n_layers=2, seed=cfg.seed,
    )
    method = cfg.method
    if method in (MethodKind.LORA16, MethodKind.LORA8, MethodKind.LORA4):
        if method is not MethodKind.LORA16:
            for layer in model.layers:
                layer.W = dequantize(quantize_rtn(layer.W, bits=cfg.quant_bits))
        attach_adapters(model, rank=cfg.lora_rank, alpha=cfg.lora_alpha, seed=cfg.seed)
        model.base_frozen = True
    return model


def train_toy(
    cfg: TrainingConfig,
    ds: DatasetSpec,
    sink: Optional[Sink] = None,
) -> tuple[ToyModel, dict]:
    """Run cfg.epochs passes over ds at character level.

    One step = one record. Telemetry carries (step, loss, lr, cumulative
    tokens); loss is measured before the step's update. Deterministic
    given cfg.seed.
    """
    texts = [t for t in _training_texts(ds) if len(t) >= 2]
    if not texts:
        raise EmptyDataset(f"dataset {ds.name!r} has no trainable records")

    codec = CharCodec.build(texts)
    encoded = [codec.encode(t) for t in texts]
    batches = [windows(tokens, CONTEXT) for tokens in encoded]

    model = build_model(cfg, vocab=codec.vocab)
    params = model.trainable_params()
    lion_state = LionState.init(params) if cfg.optimizer == "lion" else None
    adam_state = AdamState.init(params) if cfg.optimizer == "adam" else None
    fused = cfg.method is MethodKind.LOMO16

    step = 0
    tokens_seen = 0
    first_loss = None
    loss = float("nan")
    for _ in range(cfg.epochs):
        for (inputs, targets), token_count in zip(batches, (len(e) for e in encoded)):
            if fused:
                loss = lomo_sgd_run(model, inputs, targets, lr=cfg.lr)
            else:
                loss, grads = model.loss_and_grads(inputs, targets)
                params = model.trainable_params()
                if cfg.optimizer == "lion":
                    params, lion_state = lion_step(params, grads, lion_state, cfg.lr)
                else:
                    params, adam_state = adam_step(params, grads, adam_state, cfg.lr)
                model.set_params(params)
            step += 1
            tokens_seen += token_count
            if first_loss is None:
                first_loss = loss
            if sink is not None:
                sink(TelemetryRecord(step=step, loss=float(loss), lr=cfg.lr, tokens=tokens_seen))

    summary = {
        "steps": step,
        "tokens": tokens_seen,
        "vocab": codec.vocab,
        "initial_loss": float(first_loss),
        "final_loss": float(loss),
        "records": len(texts),
    }
    return model, summary
