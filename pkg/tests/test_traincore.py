from __future__ import annotations

import math

import numpy as np
import pytest

from tunekit.config import TrainingConfig, set_arg
from tunekit.datasets import DatasetRecord, DatasetSpec
from tunekit.errors import BadSpec, EmptyDataset, ShapeMismatch
from tunekit.memory import MethodKind
from tunekit.traincore import (
    AdamState,
    CharCodec,
    GradMeter,
    LionState,
    adam_step,
    cross_entropy,
    cross_entropy_grad,
    dequantize,
    init_toy_model,
    lion_step,
    log_softmax,
    lomo_sgd_run,
    lora_forward,
    lora_merge,
    quantize_rtn,
    reference_sgd_run,
    sgd_step,
    softmax,
    train_toy,
)
from tunekit.traincore.model import attach_adapters, windows
from tunekit.traincore.train import build_model


# ---------------------------------------------------------------- ops

def test_cross_entropy_uniform_logits():
    logits = np.zeros((5, 11))
    assert cross_entropy(logits, np.arange(5)) == pytest.approx(math.log(11), abs=1e-12)


def test_cross_entropy_confident_prediction():
    logits = np.full((1, 4), -30.0)
    logits[0, 2] = 30.0
    assert cross_entropy(logits, [2]) == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_against_direct_formula():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n, v = int(rng.integers(1, 12)), int(rng.integers(2, 9))
        logits = rng.standard_normal((n, v)) * 3
        targets = rng.integers(0, v, size=n)
        # independent computation: explicit logsumexp per row
        total = 0.0
        for i in range(n):
            row = logits[i]
            lse = math.log(sum(math.exp(x - row.max()) for x in row)) + row.max()
            total += lse - row[targets[i]]
        assert cross_entropy(logits, targets) == pytest.approx(total / n, abs=1e-9)


def test_cross_entropy_grad_matches_finite_differences():
    rng = np.random.default_rng(1)
    logits = rng.standard_normal((4, 6))
    targets = rng.integers(0, 6, size=4)
    grad = cross_entropy_grad(logits, targets)
    eps = 1e-6
    for i in range(4):
        for j in range(6):
            up, down = logits.copy(), logits.copy()
            up[i, j] += eps
            down[i, j] -= eps
            num = (cross_entropy(up, targets) - cross_entropy(down, targets)) / (2 * eps)
            assert grad[i, j] == pytest.approx(num, abs=1e-7)


def test_softmax_rows_sum_to_one_and_stability():
    logits = np.array([[1e4, 1e4 + 1.0], [-1e4, 0.0]])
    probs = softmax(logits)
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert np.all(np.isfinite(log_softmax(logits)))


def test_ops_shape_errors():
    with pytest.raises(ShapeMismatch):
        cross_entropy(np.zeros(3), [0])
    with pytest.raises(ShapeMismatch):
        cross_entropy(np.zeros((2, 3)), [0])
    with pytest.raises(ShapeMismatch):
        cross_entropy(np.zeros((2, 3)), [0, 3])
    with pytest.raises(ShapeMismatch):
        cross_entropy(np.zeros((0, 3)), [])


# ---------------------------------------------------------------- optimizers

def test_lion_single_step_hand_oracle():
    params = {"w": np.array([1.0, -2.0])}
    grads = {"w": np.array([2.0, -0.5])}
    state = LionState.init(params)
    new, ns = lion_step(params, grads, state, lr=0.1)
    # c = 0.9*0 + 0.1*g -> sign c = sign g
    assert np.array_equal(new["w"], np.array([1.0 - 0.1, -2.0 + 0.1]))
    assert np.allclose(ns.momentum["w"], 0.01 * np.array([2.0, -0.5]))


def test_lion_weight_decay_term():
    params = {"w": np.array([4.0])}
    grads = {"w": np.array([1.0])}
    state = LionState.init(params, weight_decay=0.1)
    new, _ = lion_step(params, grads, state, lr=0.5)
    assert new["w"][0] == pytest.approx(4.0 - 0.5 * (1.0 + 0.1 * 4.0))


def test_lion_update_magnitude_is_lr():
    rng = np.random.default_rng(2)
    params = {"w": rng.standard_normal(20)}
    grads = {"w": rng.standard_normal(20)}
    new, _ = lion_step(params, grads, LionState.init(params), lr=0.03)
    deltas = np.abs(new["w"] - params["w"])
    assert np.allclose(deltas, 0.03)


def test_lion_direction_invariant_to_gradient_rescale():
    rng = np.random.default_rng(3)
    params_a = {"w": rng.standard_normal(16)}
    params_b = {k: v.copy() for k, v in params_a.items()}
    state_a = LionState.init(params_a)
    state_b = LionState.init(params_b)
    for _ in range(10):
        g = rng.standard_normal(16)
        params_a, state_a = lion_step(params_a, {"w": g}, state_a, lr=0.01)
        params_b, state_b = lion_step(params_b, {"w": g * 1e6}, state_b, lr=0.01)
        assert np.array_equal(params_a["w"], params_b["w"])


def test_lion_one_buffer_adam_two():
    params = {"w": np.zeros(3), "b": np.zeros(2)}
    lion = LionState.init(params)
    adam = AdamState.init(params)
    assert lion.buffers_per_tensor() == 1
    assert adam.buffers_per_tensor() == 2
    assert set(lion.momentum) == {"w", "b"}
    assert set(adam.m) == set(adam.v) == {"w", "b"}


def test_adam_two_steps_hand_oracle():
    params = {"w": np.array([1.0])}
    state = AdamState.init(params)
    g1, g2 = np.array([1.0]), np.array([-2.0])
    p1, s1 = adam_step(params, {"w": g1}, state, lr=0.1)
    # t=1: m=0.1, v=0.001, mhat=1, vhat=1 -> p -= 0.1/(1+eps)
    assert p1["w"][0] == pytest.approx(1.0 - 0.1 * 1.0 / (1.0 + 1e-8), abs=1e-15)
    p2, s2 = adam_step(p1, {"w": g2}, s1, lr=0.1)
    m2 = 0.9 * 0.1 + 0.1 * -2.0
    v2 = 0.999 * 0.001 + 0.001 * 4.0
    mhat = m2 / (1 - 0.9**2)
    vhat = v2 / (1 - 0.999**2)
    assert p2["w"][0] == pytest.approx(
        p1["w"][0] - 0.1 * mhat / (math.sqrt(vhat) + 1e-8), abs=1e-15)
    assert s2.step == 2


def test_optimizers_do_not_mutate_inputs():
    rng = np.random.default_rng(4)
    params = {"w": rng.standard_normal(5)}
    grads = {"w": rng.standard_normal(5)}
    p0, g0 = params["w"].copy(), grads["w"].copy()
    for step in (
        lambda: lion_step(params, grads, LionState.init(params), 0.1),
        lambda: adam_step(params, grads, AdamState.init(params), 0.1),
        lambda: sgd_step(params, grads, 0.1),
    ):
        step()
        assert np.array_equal(params["w"], p0)
        assert np.array_equal(grads["w"], g0)


def test_sgd_step_exact():
    params = {"w": np.array([1.0, 2.0])}
    out = sgd_step(params, {"w": np.array([0.5, -1.0])}, lr=2.0)
    assert np.array_equal(out["w"], np.array([0.0, 4.0]))


def test_optimizer_alignment_errors():
    with pytest.raises(ShapeMismatch):
        sgd_step({"w": np.zeros(2)}, {"v": np.zeros(2)}, 0.1)
    with pytest.raises(ShapeMismatch):
        sgd_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, 0.1)


# ---------------------------------------------------------------- lora

def test_lora_zero_b_is_exact_base_forward():
    rng = np.random.default_rng(5)
    W = rng.standard_normal((6, 10))
    A = rng.standard_normal((3, 10))
    B = np.zeros((6, 3))
    for _ in range(20):
        x = rng.standard_normal(10)
        assert np.array_equal(lora_forward(W, A, B, alpha=16, r=3, x=x), W @ x)


def test_lora_merge_equals_adapter_forward():
    rng = np.random.default_rng(6)
    for _ in range(50):
        out_d, in_d, r = (int(v) for v in rng.integers(2, 12, size=3))
        W = rng.standard_normal((out_d, in_d))
        A = rng.standard_normal((r, in_d))
        B = rng.standard_normal((out_d, r))
        x = rng.standard_normal(in_d)
        merged = lora_merge(W, A, B, alpha=8.0, r=r)
        assert np.abs(merged @ x - lora_forward(W, A, B, 8.0, r, x)).max() <= 1e-10


def test_lora_weight_delta_rank_bounded():
    rng = np.random.default_rng(7)
    for _ in range(100):
        out_d, in_d = int(rng.integers(8, 24)), int(rng.integers(8, 24))
        r = int(rng.integers(1, 5))
        W = rng.standard_normal((out_d, in_d))
        A = rng.standard_normal((r, in_d))
        B = rng.standard_normal((out_d, r))
        delta = lora_merge(W, A, B, alpha=16.0, r=r) - W
        s = np.linalg.svd(delta, compute_uv=False)
        assert (s > 1e-10 * s[0]).sum() <= r


def test_lora_shape_errors():
    W = np.zeros((4, 5))
    with pytest.raises(ShapeMismatch):
        lora_forward(W, np.zeros((2, 4)), np.zeros((4, 2)), 8, 2, np.zeros(5))
    with pytest.raises(ShapeMismatch):
        lora_forward(W, np.zeros((2, 5)), np.zeros((5, 2)), 8, 2, np.zeros(5))
    with pytest.raises(ShapeMismatch):
        lora_forward(W, np.zeros((2, 5)), np.zeros((4, 2)), 8, 2, np.zeros(4))
    with pytest.raises(ShapeMismatch):
        lora_merge(W, np.zeros((3, 5)), np.zeros((4, 2)), 8, 2)


# ---------------------------------------------------------------- model

def test_windows_hand_example():
    inputs, targets = windows([3, 1, 2], context=3)
    assert inputs.tolist() == [[0, 0, 3], [0, 3, 1]]
    assert targets.tolist() == [1, 2]


def test_windows_short_sequences():
    inputs, targets = windows([5], context=4)
    assert inputs.shape == (0, 4) and targets.shape == (0,)


def test_char_codec():
    codec = CharCodec.build(["cab", "abc"])
    assert codec.chars == ("a", "b", "c")
    assert codec.vocab == 4
    assert codec.encode("cab") == [3, 1, 2]
    assert 0 not in codec.encode("abcabc")  # pad id never produced
    with pytest.raises(EmptyDataset):
        CharCodec.build([])


def test_one_hot_layout():
    model = init_toy_model(vocab=4, context=3, hidden=8, n_layers=2)
    onehot = model.one_hot(np.array([[0, 2, 3]]))
    assert onehot.shape == (1, 12)
    assert onehot.sum() == 3.0
    assert onehot[0, 0] == 1.0          # slot 0, id 0
    assert onehot[0, 4 + 2] == 1.0      # slot 1, id 2
    assert onehot[0, 8 + 3] == 1.0      # slot 2, id 3
    with pytest.raises(ShapeMismatch):
        model.one_hot(np.array([[0, 1]]))


def test_model_gradcheck():
    """Analytic gradients match central differences at 1e-5."""
    rng = np.random.default_rng(8)
    model = init_toy_model(vocab=5, context=4, hidden=6, n_layers=2, seed=99)
    inputs = rng.integers(0, 5, size=(7, 4))
    targets = rng.integers(0, 5, size=7)
    _, grads = model.loss_and_grads(inputs, targets)
    eps = 1e-6
    for name, grad in grads.items():
        flat = grad.reshape(-1)
        param = model.trainable_params()[name]
        picks = rng.choice(flat.size, size=min(12, flat.size), replace=False)
        for idx in picks:
            orig = param.reshape(-1)[idx]
            param.reshape(-1)[idx] = orig + eps
            up = model.loss(inputs, targets)
            param.reshape(-1)[idx] = orig - eps
            down = model.loss(inputs, targets)
            param.reshape(-1)[idx] = orig
            num = (up - down) / (2 * eps)
            assert abs(flat[idx] - num) <= 1e-5 * max(1.0, abs(num)), name


def test_adapter_gradcheck():
    rng = np.random.default_rng(9)
    model = init_toy_model(vocab=4, context=3, hidden=5, n_layers=2, seed=7)
    attach_adapters(model, rank=2, alpha=4.0, seed=7)
    # make B nonzero so its gradient path is exercised
    for pair in model.adapted_layers.values():
        pair.B = rng.standard_normal(pair.B.shape) * 0.1
    model.base_frozen = True
    inputs = rng.integers(0, 4, size=(5, 3))
    targets = rng.integers(0, 4, size=5)
    _, grads = model.loss_and_grads(inputs, targets)
    assert set(grads) == {"layer0.A", "layer0.B", "layer1.A", "layer1.B"}
    eps = 1e-6
    for name, grad in grads.items():
        flat = grad.reshape(-1)
        param = model.trainable_params()[name]
        for idx in range(min(8, flat.size)):
            orig = param.reshape(-1)[idx]
            param.reshape(-1)[idx] = orig + eps
            up = model.loss(inputs, targets)
            param.reshape(-1)[idx] = orig - eps
            down = model.loss(inputs, targets)
            param.reshape(-1)[idx] = orig
            num = (up - down) / (2 * eps)
            assert abs(flat[idx] - num) <= 1e-5 * max(1.0, abs(num)), name


def test_backward_layers_order_and_loss():
    rng = np.random.default_rng(10)
    model = init_toy_model(vocab=4, context=3, hidden=5, n_layers=3)
    inputs = rng.integers(0, 4, size=(6, 3))
    targets = rng.integers(0, 4, size=6)
    seen = [(i, loss) for i, loss, _ in model.backward_layers(inputs, targets)]
    assert [i for i, _ in seen] == [2, 1, 0]
    assert len({loss for _, loss in seen}) == 1


# ---------------------------------------------------------------- lomo

def _corpus_batches(n_layers=2):
    texts = [f"Q{i} alpha? A{i} beta." for i in range(5)]
    codec = CharCodec.build(texts)
    batches = [windows(codec.encode(t), 8) for t in texts]
    model = init_toy_model(vocab=codec.vocab, context=8, hidden=16,
                           n_layers=n_layers, seed=21)
    return model, batches


def test_lomo_matches_reference_sgd_100_steps_bitwise():
    fused, batches = _corpus_batches()
    reference, _ = _corpus_batches()
    for step in range(100):
        inputs, targets = batches[step % len(batches)]
        lf = lomo_sgd_run(fused, inputs, targets, lr=0.05)
        lr_ = reference_sgd_run(reference, inputs, targets, lr=0.05)
        assert lf == lr_
        for a, b in zip(fused.layers, reference.layers):
            assert np.array_equal(a.W, b.W)
            assert np.array_equal(a.b, b.b)


def test_lomo_peak_one_vs_reference_all_layers():
    fused, batches = _corpus_batches(n_layers=4)
    reference, _ = _corpus_batches(n_layers=4)
    inputs, targets = batches[0]
    m1, m2 = GradMeter(), GradMeter()
    lomo_sgd_run(fused, inputs, targets, lr=0.1, meter=m1)
    reference_sgd_run(reference, inputs, targets, lr=0.1, meter=m2)
    assert m1.peak == 1
    assert m2.peak == 4
    assert m1.live == set() and m2.live == set()


def test_lomo_returns_pre_update_loss():
    model, batches = _corpus_batches()
    inputs, targets = batches[0]
    before = model.loss(inputs, targets)
    reported = lomo_sgd_run(model, inputs, targets, lr=0.1)
    assert reported == before
    assert model.loss(inputs, targets) < before


# ---------------------------------------------------------------- quant

def test_quant_error_bounded_by_half_step():
    rng = np.random.default_rng(11)
    for i in range(200):
        shape = tuple(rng.integers(1, 40, size=int(rng.integers(1, 3))))
        tensor = rng.standard_normal(shape) * np.exp(rng.uniform(-4, 4))
        bits = 4 if i % 2 else 8
        qt = quantize_rtn(tensor, bits=bits)
        err = np.zeros(len(qt.scales) * qt.group_size)
        err[: tensor.size] = np.abs(dequantize(qt) - tensor).reshape(-1)
        assert np.all(err.reshape(-1, qt.group_size) <= qt.steps[:, None] / 2)


def test_quant_all_zero_and_constant_exact():
    rng = np.random.default_rng(12)
    zero = np.zeros((5, 9))
    for bits in (4, 8):
        assert np.array_equal(dequantize(quantize_rtn(zero, bits=bits)), zero)
        for _ in range(50):
            c = float(rng.standard_normal() * np.exp(rng.uniform(-12, 12)))
            t = np.full(int(rng.integers(1, 130)), c)
            assert np.array_equal(dequantize(quantize_rtn(t, bits=bits)), t)


def test_quant_code_grid_round_trips_exactly():
    # values sitting exactly on the code grid survive 4- and 8-bit trips
    for bits, qmax in ((4, 7), (8, 127)):
        grid = np.array([k / qmax for k in range(-qmax, qmax + 1)])
        qt = quantize_rtn(grid, bits=bits, group=len(grid))
        assert np.array_equal(dequantize(qt), grid)


def test_quant_shapes_groups_and_packing():
    rng = np.random.default_rng(13)
    tensor = rng.standard_normal((3, 50))  # 150 elements: pads to 3 groups
    qt = quantize_rtn(tensor, bits=4, group=64)
    assert qt.shape == (3, 50)
    assert qt.count == 150
    assert len(qt.scales) == 3
    assert qt.codes.dtype == np.uint8
    assert len(qt.codes) == (3 * 64) // 2  # two nibbles per byte
    assert dequantize(qt).shape == (3, 50)
    qt8 = quantize_rtn(tensor, bits=8, group=64)
    assert len(qt8.codes) == 3 * 64


def test_quant_bad_specs():
    with pytest.raises(BadSpec):
        quantize_rtn(np.ones(4), bits=3)
    with pytest.raises(BadSpec):
        quantize_rtn(np.ones(4), bits=4, group=0)


def test_quant_negative_extreme_code_survives_packing():
    # a group whose min is -absmax exercises the int8 sign extension
    t = np.array([-1.0, 1.0, -0.5, 0.25])
    qt = quantize_rtn(t, bits=4, group=4)
    back = dequantize(qt)
    assert back[0] == -1.0 and back[1] == 1.0


# ---------------------------------------------------------------- train loop

def _memorizable():
    words = ["alpha", "bravo", "charlie", "delta", "echo",
             "foxtrot", "golf", "hotel", "india", "juliet"]
    recs = tuple(
        DatasetRecord(input=f"Q{i} {w}?", output=f"A{i} {w} indeed.")
        for i, w in enumerate(words)
    )
    return DatasetSpec(name="memorize", mode="instruct", records=recs)


def test_train_toy_telemetry_contract():
    ds = _memorizable()
    cfg = TrainingConfig(model="m", dataset="memorize", epochs=3, lr=0.02)
    telem = []
    _, summary = train_toy(cfg, ds, sink=telem.append)
    assert summary["steps"] == 3 * 10
    assert [t.step for t in telem] == list(range(1, 31))
    assert all(t.lr == 0.02 for t in telem)
    tokens = [t.tokens for t in telem]
    assert tokens == sorted(tokens)
    per_epoch = sum(len(f"Human: Q{i} {w}? Assistant: A{i} {w} indeed.")
                    for i, w in enumerate(["alpha", "bravo", "charlie", "delta",
                                           "echo", "foxtrot", "golf", "hotel",
                                           "india", "juliet"]))
    assert tokens[-1] == 3 * per_epoch
    assert summary["initial_loss"] == telem[0].loss
    assert summary["final_loss"] == telem[-1].loss


def test_train_toy_deterministic():
    ds = _memorizable()
    cfg = TrainingConfig(model="m", dataset="memorize", epochs=2, lr=0.02)
    a, sa = train_toy(cfg, ds)
    b, sb = train_toy(cfg, ds)
    assert sa == sb
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.W, lb.W)
        assert np.array_equal(la.b, lb.b)


def test_train_toy_seed_changes_trajectory():
    ds = _memorizable()
    base = TrainingConfig(model="m", dataset="memorize", epochs=1, lr=0.02)
    other = set_arg(base, "seed", "99")
    _, sa = train_toy(base, ds)
    _, sb = train_toy(other, ds)
    assert sa["initial_loss"] != sb["initial_loss"]


def test_train_toy_converges_on_memorizable_corpus():
    ds = _memorizable()
    cfg = TrainingConfig(model="m", dataset="memorize", epochs=20, lr=0.02)
    _, summary = train_toy(cfg, ds)
    assert summary["steps"] == 200
    assert summary["final_loss"] < 0.2 * summary["initial_loss"]


def test_train_toy_lora_freezes_base():
    ds = _memorizable()
    cfg = set_arg(
        TrainingConfig(model="m", dataset="memorize", epochs=2, lr=0.02),
        "method", "lora16")
    model, _ = train_toy(cfg, ds)
    # base weights must equal a freshly built (untrained) model's
    fresh = build_model(cfg, vocab=model.vocab)
    for trained, untouched in zip(model.layers, fresh.layers):
        assert np.array_equal(trained.W, untouched.W)
    assert any(np.any(p.B != 0) for p in model.adapted_layers.values())


def test_train_toy_qlora_quantizes_base():
    ds = _memorizable()
    full = TrainingConfig(model="m", dataset="memorize", epochs=1, lr=0.02)
    q4 = set_arg(full, "method", "lora4")
    m_full, _ = train_toy(full, ds)
    m_q4, _ = train_toy(q4, ds)
    w_q = m_q4.layers[0].W
    assert not np.array_equal(w_q, m_full.layers[0].W)
    qt = quantize_rtn(w_q, bits=4)
    assert np.array_equal(dequantize(qt), w_q)  # already on the 4-bit grid


def test_train_toy_lomo_runs_fused():
    ds = _memorizable()
    cfg = set_arg(
        TrainingConfig(model="m", dataset="memorize", epochs=1, lr=0.05),
        "method", "lomo16")
    model, summary = train_toy(cfg, ds)
    assert summary["steps"] == 10
    assert summary["final_loss"] < summary["initial_loss"]


def test_train_toy_adam_path():
    ds = _memorizable()
    cfg = set_arg(
        TrainingConfig(model="m", dataset="memorize", epochs=2, lr=0.005),
        "optimizer", "adam")
    _, summary = train_toy(cfg, ds)
    assert summary["final_loss"] < summary["initial_loss"]


def test_train_toy_rejects_empty():
    empty = DatasetSpec(name="none", mode="instruct")
    with pytest.raises(EmptyDataset):
        train_toy(TrainingConfig(model="m", dataset="none"), empty)
