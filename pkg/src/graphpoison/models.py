"""Two dense-math GNN architectures with hand-rolled reverse-mode gradients.

Both architectures are expressed as a first-layer input expansion that is
constant for a fixed graph (so it is precomputed once per training run)
followed by per-layer propagation:

* ``graphsage``: h' = relu(W @ [h_v || mean of neighbor h]), empty
  neighborhoods contribute a zero vector; each layer owns one (2*in, out)
  weight matrix.
* ``chebnet``: Chebyshev polynomial filtering over the rescaled normalized
  Laplacian, using the standard surrogate lambda_max = 2 so the operator is
  simply the negated symmetric-normalized adjacency; each layer owns K
  weight matrices of shape (in, out).

All public operations keep float32 payloads; the forward/backward pair is
dtype-parametric so numerical checks can re-run in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .bundle import GraphBundle

ARCHITECTURES = ("graphsage", "chebnet")


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "graphsage"
    hidden: int = 64
    layers: int = 2
    cheb_k: int = 2
    dropout: float = 0.2

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")
        if self.layers < 2:
            raise ValueError("need at least 2 layers")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.cheb_k < 1:
            raise ValueError("Chebyshev order K must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 400
    lr: float = 0.01
    seed: int = 0
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")


@dataclass
class TrainedModel:
    """Architecture tag plus the ordered parameter matrices that define it."""

    arch: str
    params: list[np.ndarray]
    model_config: ModelConfig
    train_config: Optional[TrainConfig] = None
    final_train_loss: Optional[float] = None

    def copy(self) -> "TrainedModel":
        return TrainedModel(self.arch, [p.copy() for p in self.params],
                            self.model_config, self.train_config, self.final_train_loss)


def layer_dims(mc: ModelConfig, d: int, c: int) -> list[tuple[int, int]]:
    """(in, out) per layer: d -> hidden -> ... -> c."""
    widths = [d] + [mc.hidden] * (mc.layers - 1) + [c]
    return list(zip(widths[:-1], widths[1:]))


def param_shapes(mc: ModelConfig, d: int, c: int) -> list[tuple[int, int]]:
    """Shapes of the flat parameter list, in layer-major order."""
    shapes = []
    for n_in, n_out in layer_dims(mc, d, c):
        if mc.arch == "graphsage":
            shapes.append((2 * n_in, n_out))
        else:
            shapes.extend([(n_in, n_out)] * mc.cheb_k)
    return shapes


def init_model(mc: ModelConfig, d: int, c: int, seed: int = 0) -> TrainedModel:
    """Glorot-uniform parameters from a seeded generator; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params = []
    for fan_in, fan_out in param_shapes(mc, d, c):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32))
    return TrainedModel(mc.arch, params, mc)


# -- graph operators -----------------------------------------------------------


def mean_operator(g: GraphBundle, dtype=np.float32) -> sp.csr_matrix:
    """Row-normalized adjacency D^-1 A; rows of isolated nodes are zero."""
    deg = np.diff(g.indptr).astype(dtype)
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    data = np.repeat(inv, np.diff(g.indptr))
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.num_nodes, g.num_nodes))


def cheb_operator(g: GraphBundle, dtype=np.float32) -> sp.csr_matrix:
    """Rescaled Laplacian 2 L_sym / lambda_max - I with lambda_max = 2.

    This collapses to -D^-1/2 A D^-1/2, which is symmetric and has empty rows
    for isolated nodes.
    """
    deg = np.diff(g.indptr).astype(dtype)
    inv_sqrt = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg, where=deg > 0), out=inv_sqrt, where=deg > 0)
    src = np.repeat(np.arange(g.num_nodes), np.diff(g.indptr))
    data = -inv_sqrt[src] * inv_sqrt[g.indices]
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.num_nodes, g.num_nodes))


def graph_operator(mc: ModelConfig, g: GraphBundle, dtype=np.float32) -> sp.csr_matrix:
    return mean_operator(g, dtype) if mc.arch == "graphsage" else cheb_operator(g, dtype)


def _propagate(mc: ModelConfig, op: sp.csr_matrix, h: np.ndarray) -> list[np.ndarray]:
    """Per-layer input expansion: the blocks that multiply each weight matrix."""
    if mc.arch == "graphsage":
        return [h, op @ h]
    blocks = [h]
    if mc.cheb_k > 1:
        blocks.append(op @ h)
    for _ in range(2, mc.cheb_k):
        blocks.append(2.0 * (op @ blocks[-1]) - blocks[-2])
    return blocks


def _propagate_adjoint(mc: ModelConfig, op: sp.csr_matrix,
                       block_grads: list[np.ndarray]) -> np.ndarray:
    """Gradient w.r.t. the layer input h given gradients w.r.t. each block."""
    if mc.arch == "graphsage":
        return block_grads[0] + op.T @ block_grads[1]
    # reverse the Chebyshev recurrence; the operator is symmetric so op.T = op
    grads = [gb.copy() for gb in block_grads]
    for k in range(len(grads) - 1, 1, -1):
        grads[k - 1] += 2.0 * (op @ grads[k])
        grads[k - 2] -= grads[k]
    out = grads[0]
    if len(grads) > 1:
        out = out + op @ grads[1]
    return out


def _params_per_layer(mc: ModelConfig) -> int:
    return 1 if mc.arch == "graphsage" else mc.cheb_k


def _weight_views(mc: ModelConfig, layer_params: list[np.ndarray],
                  dtype) -> list[np.ndarray]:
    """One weight view per propagation block.

    GraphSAGE keeps a single (2*in, out) matrix whose top half multiplies the
    node's own representation and bottom half the neighbor mean; ChebNet keeps
    one (in, out) matrix per polynomial order.
    """
    if mc.arch == "graphsage":
        w = layer_params[0]
        half = w.shape[0] // 2
        views = [w[:half], w[half:]]
    else:
        views = layer_params
    return [v if v.dtype == dtype else v.astype(dtype) for v in views]


def forward_pass(model: TrainedModel, g: GraphBundle, *, training: bool = False,
                 dropout_rng: np.random.Generator | None = None,
                 dtype=np.float32, op: sp.csr_matrix | None = None,
                 first_blocks: list[np.ndarray] | None = None,
                 with_cache: bool = False):
    """Run the network; returns logits, or (logits, cache) with ``with_cache``.

    ``op`` and ``first_blocks`` allow a training loop to reuse the graph
    operator and the constant first-layer expansion across epochs.
    """
    mc = model.model_config
    expected_d = model.params[0].shape[0] // (2 if mc.arch == "graphsage" else 1)
    if g.num_features != expected_d:
        raise ValueError(
            f"feature dimension {g.num_features} does not match the model ({expected_d})")
    if training and mc.dropout > 0.0 and dropout_rng is None:
        dropout_rng = np.random.default_rng(0)

    if op is None:
        op = graph_operator(mc, g, dtype)
    h = g.features.astype(dtype)
    per_layer = _params_per_layer(mc)
    n_layers = len(model.params) // per_layer

    cache = {"blocks": [], "pre_relu": [], "drop_masks": [], "op": op}
    for layer in range(n_layers):
        if layer == 0 and first_blocks is not None:
            blocks = first_blocks
        else:
            blocks = _propagate(mc, op, h)
        layer_params = model.params[layer * per_layer:(layer + 1) * per_layer]
        views = _weight_views(mc, layer_params, dtype)
        z = blocks[0] @ views[0]
        for blk, w in zip(blocks[1:], views[1:]):
            z += blk @ w
        last = layer == n_layers - 1
        if last:
            h = z
        else:
            h = np.maximum(z, 0.0)
            mask = None
            if training and mc.dropout > 0.0:
                keep = dropout_rng.random(h.shape) >= mc.dropout
                mask = keep.astype(dtype) / dtype(1.0 - mc.dropout)
                h = h * mask
            cache["drop_masks"].append(mask)
        cache["blocks"].append(blocks)
        cache["pre_relu"].append(z)
    if with_cache:
        return h, cache
    return h


def backward_pass(model: TrainedModel, cache: dict, dlogits: np.ndarray) -> list[np.ndarray]:
    """Gradients of the loss w.r.t. every parameter matrix, same order as params."""
    mc = model.model_config
    per_layer = _params_per_layer(mc)
    n_layers = len(model.params) // per_layer
    op = cache["op"]
    dtype = dlogits.dtype
    grads: list[np.ndarray] = [None] * len(model.params)

    dh = dlogits
    for layer in range(n_layers - 1, -1, -1):
        blocks = cache["blocks"][layer]
        layer_params = model.params[layer * per_layer:(layer + 1) * per_layer]
        views = _weight_views(mc, layer_params, dtype)
        if layer < n_layers - 1:
            mask = cache["drop_masks"][layer]
            if mask is not None:
                dh = dh * mask
            dh = dh * (cache["pre_relu"][layer] > 0)
        dz = dh
        block_dws = [blk.T @ dz for blk in blocks]
        if mc.arch == "graphsage":
            grads[layer] = np.concatenate(block_dws, axis=0)
        else:
            for k, dw in enumerate(block_dws):
                grads[layer * per_layer + k] = dw
        if layer > 0:
            block_grads = [dz @ w.T for w in views]
            dh = _propagate_adjoint(mc, op, block_grads)
    return grads


def forward(model: TrainedModel, g: GraphBundle, training_mode: bool = False,
            seed: int = 0) -> np.ndarray:
    """Logits (n x classes). Dropout only applies when ``training_mode``."""
    rng = np.random.default_rng(seed)
    return forward_pass(model, g, training=training_mode, dropout_rng=rng)
