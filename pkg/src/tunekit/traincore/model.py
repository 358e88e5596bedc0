"""A character-level dense network small enough to verify by hand.

The model predicts the next character from a fixed window of previous
characters (one-hot concatenated). Layers are plain dense matrices; any
layer may carry a LoRA pair. This is the smallest structure on which the
objective, optimizers, adapters, LOMO and quantization are all testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from ..errors import EmptyDataset, ShapeMismatch
from .ops import cross_entropy, cross_entropy_grad

PAD_ID = 0


@dataclass(frozen=True)
class CharCodec:
    """Deterministic char vocabulary; id 0 is the left-padding slot."""

    chars: tuple[str, ...]

    @classmethod
    def build(cls, texts: list[str]) -> "CharCodec":
        alphabet = sorted(set("".join(texts)))
        if not alphabet:
            raise EmptyDataset("no characters to build a vocabulary from")
        return cls(chars=tuple(alphabet))

    @property
    def vocab(self) -> int:
        return len(self.chars) + 1  # plus the pad slot

    def encode(self, text: str) -> list[int]:
        index = {c: i + 1 for i, c in enumerate(self.chars)}
        return [index[c] for c in text]


def windows(tokens: list[int], context: int) -> tuple[np.ndarray, np.ndarray]:
    """(inputs, targets) for next-char prediction over one sequence.

    Position t (t >= 1) is predicted from the `context` tokens ending at
    t-1, left-padded with PAD_ID.
    """
    n = len(tokens)
    if n < 2:
        return np.zeros((0, context), dtype=np.int64), np.zeros(0, dtype=np.int64)
    padded = [PAD_ID] * context + tokens
    inputs = np.array(
        [padded[t + 1 : t + 1 + context] for t in range(n - 1)], dtype=np.int64
    )
    targets = np.array(tokens[1:], dtype=np.int64)
    return inputs, targets


@dataclass
class DenseLayer:
    W: np.ndarray  # out x in
    b: np.ndarray  # out


@dataclass
class LoraPair:
    A: np.ndarray  # r x in
    B: np.ndarray  # out x r


@dataclass
class ToyModel:
    layers: list[DenseLayer]
    vocab: int
    context: int
    adapted_layers: dict[int, LoraPair] = field(default_factory=dict)
    lora_rank: int = 8
    lora_alpha: float = 16.0
    base_frozen: bool = False

    def effective_weight(self, i: int) -> np.ndarray:
        layer = self.layers[i]
        pair = self.adapted_layers.get(i)
        if pair is None:
            return layer.W
        return layer.W + (self.lora_alpha / self.lora_rank) * (pair.B @ pair.A)

    def one_hot(self, inputs: np.ndarray) -> np.ndarray:
        if inputs.ndim != 2 or inputs.shape[1] != self.context:
            raise ShapeMismatch(
                f"inputs must be positions x {self.context}, got {inputs.shape}"
            )
        positions = inputs.shape[0]
        flat = np.zeros((positions, self.context, self.vocab), dtype=np.float64)
        rows = np.repeat(np.arange(positions), self.context)
        cols = np.tile(np.arange(self.context), positions)
        flat[rows, cols, inputs.reshape(-1)] = 1.0
        return flat.reshape(positions, self.context * self.vocab)

    def forward(self, inputs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (logits, activations); activations[i] feeds layer i."""
        h = self.one_hot(inputs)
        acts = [h]
        last = len(self.layers) - 1
        for i in range(len(self.layers)):
            z = h @ self.effective_weight(i).T + self.layers[i].b
            h = z if i == last else np.tanh(z)
            if i != last:
                acts.append(h)
        return h, acts

    def loss(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        logits, _ = self.forward(inputs)
        return cross_entropy(logits, targets)

    def trainable_params(self) -> dict[str, np.ndarray]:
        """Named view of what trains under the current freeze settings."""
        params: dict[str, np.ndarray] = {}
        if not self.base_frozen:
            for i, layer in enumerate(self.layers):
                params[f"layer{i}.W"] = layer.W
                params[f"layer{i}.b"] = layer.b
        for i, pair in sorted(self.adapted_layers.items()):
            params[f"layer{i}.A"] = pair.A
            params[f"layer{i}.B"] = pair.B
        return params

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            idx = int(name[len("layer"):name.index(".")])
            attr = name.split(".", 1)[1]
            if attr in ("A", "B"):
                setattr(self.adapted_layers[idx], attr, value)
            else:
                setattr(self.layers[idx], attr, value)

    def base_weights(self) -> list[np.ndarray]:
        return [layer.W.copy() for layer in self.layers]

    # -- backward ----------------------------------------------------------

    def backward_layers(
        self, inputs: np.ndarray, targets: np.ndarray, meter: Optional["GradMeter"] = None,
    ) -> Iterator[tuple[int, float, dict[str, np.ndarray]]]:
        """Yield (layer index, loss, grads) from the last layer backwards.

        The upstream delta for the next-lower layer is computed before a
        layer's gradients are yielded, so a consumer may overwrite that
        layer's weights immediately (fused updates) without corrupting the
        rest of the pass. Gradients for frozen tensors are not produced.
        """
        logits, acts = self.forward(inputs)
        loss = cross_entropy(logits, targets)
        delta = cross_entropy_grad(logits, targets)
        for i in range(len(self.layers) - 1, -1, -1):
            h_in = acts[i]
            grads: dict[str, np.ndarray] = {}
            dW = delta.T @ h_in
            if i > 0:
                upstream = delta @ self.effective_weight(i)
                delta_next = upstream * (1.0 - acts[i] ** 2)
            else:
                delta_next = None
            if not self.base_frozen:
                grads[f"layer{i}.W"] = dW
                grads[f"layer{i}.b"] = delta.sum(axis=0)
            pair = self.adapted_layers.get(i)
            if pair is not None:
                scale = self.lora_alpha / self.lora_rank
                grads[f"layer{i}.A"] = scale * (pair.B.T @ dW)
                grads[f"layer{i}.B"] = scale * (dW @ pair.A.T)
            if meter is not None:
                meter.alloc(i)
            yield i, loss, grads
            if meter is not None:
                meter.free(i)
            delta = delta_next

    def loss_and_grads(
        self, inputs: np.ndarray, targets: np.ndarray,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Whole-model gradients in one dict (the non-fused path)."""
        loss = 0.0
        grads: dict[str, np.ndarray] = {}
        for _, layer_loss, layer_grads in self.backward_layers(inputs, targets):
            loss = layer_loss
            grads.update(layer_grads)
        return loss, grads


def init_toy_model(
    vocab: int,
    context: int = 8,
    hidden: int = 64,
    n_layers: int = 2,
    seed: int = 1234,
) -> ToyModel:
    """Seeded Gaussian weights, zero biases; dims chosen for desk scale."""
    rng = np.random.default_rng(seed)
    dims = [context * vocab] + [hidden] * (n_layers - 1) + [vocab]
    layers = []
    for i in range(n_layers):
        in_dim, out_dim = dims[i], dims[i + 1]
        W = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))
        layers.append(DenseLayer(W=W, b=np.zeros(out_dim)))
    return ToyModel(layers=layers, vocab=vocab, context=context)


def attach_adapters(model: ToyModel, rank: int, alpha: float, seed: int = 1234) -> None:
    """LoRA pairs on every layer: A seeded Gaussian, B zeros (so the
    adapted forward starts exactly at the base forward)."""
    rng = np.random.default_rng(seed)
    model.lora_rank = rank
    model.lora_alpha = alpha
    for i, layer in enumerate(model.layers):
        out_dim, in_dim = layer.W.shape
        A = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(rank, in_dim))
        B = np.zeros((out_dim, rank))
        model.adapted_layers[i] = LoraPair(A=A, B=B)
