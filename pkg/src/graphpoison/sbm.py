"""Deterministic stochastic-block-model graphs for oracles and demos.

The edge draw order is part of the contract so tests can replay it: node pairs
(i, j) with i < j are visited in lexicographic order and each consumes exactly
one uniform draw from ``default_rng([seed, 0])``. Features use an independent
stream, ``default_rng([seed, 1])``, one row of standard normals per node in id
order. Masks split each class 60/20/20 by ascending node id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import GraphBundle, build_bundle


@dataclass(frozen=True)
class SbmParams:
    block_sizes: tuple[int, ...]
    p_intra: float
    p_inter: float
    prototypes: np.ndarray  # one row per block
    noise_scale: float = 0.0
    seed: int = 0
    name: str = "sbm"

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))
        object.__setattr__(self, "prototypes", np.asarray(self.prototypes, dtype=np.float64))
        if any(s <= 0 for s in self.block_sizes):
            raise ValueError("block sizes must be positive")
        if not (0.0 <= self.p_intra <= 1.0 and 0.0 <= self.p_inter <= 1.0):
            raise ValueError("edge probabilities must be in [0, 1]")
        if self.prototypes.ndim != 2 or self.prototypes.shape[0] != len(self.block_sizes):
            raise ValueError("need one prototype row per block")


def generate_sbm(p: SbmParams) -> GraphBundle:
    """Sample a bundle; byte-identical output for identical params."""
    sizes = np.asarray(p.block_sizes)
    n = int(sizes.sum())
    labels = np.repeat(np.arange(len(sizes)), sizes)

    rng_edges = np.random.default_rng([p.seed, 0])
    rng_feat = np.random.default_rng([p.seed, 1])

    # one draw per (i, j) pair, i < j, lexicographic
    edges = []
    for i in range(n):
        draws = rng_edges.random(n - i - 1)
        probs = np.where(labels[i + 1:] == labels[i], p.p_intra, p.p_inter)
        for j in np.flatnonzero(draws < probs):
            edges.append((i, i + 1 + j))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)

    d = p.prototypes.shape[1]
    noise = rng_feat.standard_normal((n, d)) * p.noise_scale
    features = (p.prototypes[labels] + noise).astype(np.float32)

    tags = np.full(n, "none", dtype=object)
    for c in range(len(sizes)):
        ids = np.flatnonzero(labels == c)
        n_train = int(0.6 * ids.size)
        n_val = int(0.2 * ids.size)
        tags[ids[:n_train]] = "train"
        tags[ids[n_train:n_train + n_val]] = "val"
        tags[ids[n_train + n_val:]] = "test"

    return build_bundle(edges, features, labels, tags,
                        num_classes=len(sizes), dataset_name=p.name)
