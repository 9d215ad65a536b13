"""Full-batch deterministic training: masked cross-entropy, Adam, checkpoints."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bundle import GraphBundle
from .models import (ModelConfig, TrainConfig, TrainedModel, forward,
                     forward_pass, backward_pass, graph_operator, init_model,
                     _propagate)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def masked_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                         mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over masked nodes and its logits gradient.

    The gradient is (softmax - onehot) / count on masked rows, zero elsewhere.
    """
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("mask selects no nodes")
    probs = softmax(logits[idx])
    picked = probs[np.arange(idx.size), labels[idx]]
    loss = float(-np.log(np.maximum(picked, np.finfo(logits.dtype).tiny)).mean())
    grad = np.zeros_like(logits)
    g = probs
    g[np.arange(idx.size), labels[idx]] -= 1.0
    grad[idx] = g / idx.size
    return loss, grad


class Adam:
    """Standard Adam on a list of parameter matrices, bias-corrected."""

    def __init__(self, params: list[np.ndarray], tc: TrainConfig):
        self.tc = tc
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        tc = self.tc
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            if tc.weight_decay:
                g = g + tc.weight_decay * p
            self.m[i] = tc.beta1 * self.m[i] + (1.0 - tc.beta1) * g
            self.v[i] = tc.beta2 * self.v[i] + (1.0 - tc.beta2) * g * g
            m_hat = self.m[i] / (1.0 - tc.beta1 ** self.t)
            v_hat = self.v[i] / (1.0 - tc.beta2 ** self.t)
            p -= (tc.lr * m_hat / (np.sqrt(v_hat) + tc.eps)).astype(p.dtype)


def train(g: GraphBundle, mc: ModelConfig, tc: TrainConfig) -> TrainedModel:
    """Full-batch Adam on the train-mask cross-entropy; no early stopping.

    Deterministic for fixed (bundle, configs): parameters are initialized from
    ``tc.seed`` and each epoch's dropout stream is seeded by (seed, epoch).
    """
    if not g.train_mask.any():
        raise ValueError("train mask is empty")
    model = init_model(mc, g.num_features, g.num_classes, seed=tc.seed)
    model.train_config = tc
    op = graph_operator(mc, g, np.float32)
    first_blocks = _propagate(mc, op, g.features.astype(np.float32))

    optimizer = Adam(model.params, tc)
    loss = float("nan")
    for epoch in range(tc.epochs):
        rng = np.random.default_rng((tc.seed, epoch))
        logits, cache = forward_pass(model, g, training=True, dropout_rng=rng,
                                     op=op, first_blocks=first_blocks,
                                     with_cache=True)
        loss, dlogits = masked_cross_entropy(logits, g.labels, g.train_mask)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"non-finite loss at epoch {epoch} (lr={tc.lr}, arch={mc.arch})")
        grads = backward_pass(model, cache, dlogits)
        optimizer.step(model.params, grads)
    model.final_train_loss = loss
    return model


def predict(model: TrainedModel, g: GraphBundle) -> np.ndarray:
    """Per-node argmax class ids, dropout off; ties go to the lowest class id."""
    logits = forward(model, g, training_mode=False)
    return logits.argmax(axis=1)


def predict_proba(model: TrainedModel, g: GraphBundle) -> np.ndarray:
    """Per-node softmax probabilities, dropout off."""
    return softmax(forward(model, g, training_mode=False))


def accuracy(model: TrainedModel, g: GraphBundle, mask: np.ndarray) -> float:
    """Fraction of masked nodes whose prediction equals the label."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no nodes")
    preds = predict(model, g)
    return float((preds[mask] == g.labels[mask]).mean())


# -- checkpoints ----------------------------------------------------------------

_MAGIC = b"GPNN"


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Write model.bin (binary parameters) and model.json (configs) to a directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arch = model.arch.encode()
    with open(path / "model.bin", "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(arch)))
        f.write(arch)
        f.write(struct.pack("<I", len(model.params)))
        for p in model.params:
            f.write(struct.pack("<II", *p.shape))
        for p in model.params:
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    doc = {
        "arch": model.arch,
        "model_config": asdict(model.model_config),
        "train_config": asdict(model.train_config) if model.train_config else None,
        "final_train_loss": model.final_train_loss,
    }
    (path / "model.json").write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    doc = json.loads((path / "model.json").read_text())
    with open(path / "model.bin", "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path / 'model.bin'} is not a model checkpoint")
        (arch_len,) = struct.unpack("<I", f.read(4))
        arch = f.read(arch_len).decode()
        (count,) = struct.unpack("<I", f.read(4))
        shapes = [struct.unpack("<II", f.read(8)) for _ in range(count)]
        params = []
        for rows, cols in shapes:
            buf = f.read(rows * cols * 4)
            params.append(np.frombuffer(buf, dtype="<f4").reshape(rows, cols).copy())
    mc = ModelConfig(**doc["model_config"])
    tc = TrainConfig(**doc["train_config"]) if doc.get("train_config") else None
    if arch != mc.arch:
        raise ValueError("model.bin architecture disagrees with model.json")
    return TrainedModel(arch, params, mc, tc, doc.get("final_train_loss"))
