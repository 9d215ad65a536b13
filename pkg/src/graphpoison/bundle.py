"""Immutable graph bundles: storage, on-disk format, and degree/similarity primitives.

A bundle is an undirected graph held as a CSR adjacency plus a dense float32
feature matrix, integer labels, and disjoint train/val/test masks. Bundles are
frozen after construction so they can be shared freely between experiment cells.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

BUNDLE_FILES = ("meta.json", "edges.csv", "features.bin", "labels.csv", "masks.csv")


class BundleError(ValueError):
    """Raised when a bundle violates its invariants or cannot be read."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GraphBundle:
    """Undirected graph with features, labels, and split masks.

    ``indptr``/``indices`` hold the symmetric adjacency in compressed-row form
    with no self-loops and no duplicate edges. ``features`` is row-major
    float32, one row per node.
    """

    num_nodes: int
    num_features: int
    num_classes: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    dataset_name: str = "unnamed"

    def __post_init__(self):
        n, d = self.num_nodes, self.num_features
        object.__setattr__(self, "indptr", _frozen(np.asarray(self.indptr, dtype=np.int64)))
        object.__setattr__(self, "indices", _frozen(np.asarray(self.indices, dtype=np.int32)))
        feats = np.asarray(self.features, dtype=np.float32)
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int64)))
        for name in ("train_mask", "val_mask", "test_mask"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=bool)))
        self._validate()

    def _validate(self):
        n, d = self.num_nodes, self.num_features
        if self.indptr.shape != (n + 1,):
            raise BundleError(f"indptr length {self.indptr.shape[0]} != num_nodes+1 ({n + 1})")
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise BundleError("indptr is not non-decreasing from 0")
        if self.indices.shape != (int(self.indptr[-1]),):
            raise BundleError("indices length disagrees with indptr")
        if self.features.shape != (n, d):
            raise BundleError(f"features shape {self.features.shape} != ({n}, {d})")
        if self.labels.shape != (n,):
            raise BundleError("labels length != num_nodes")
        if not np.all(np.isfinite(self.features)):
            raise BundleError("non-finite feature value")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= n):
            raise BundleError("adjacency references node id out of range")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            bad = int(np.argmax((self.labels < 0) | (self.labels >= self.num_classes)))
            raise BundleError(
                f"label {int(self.labels[bad])} at node {bad} outside [0, {self.num_classes})"
            )
        for name in ("train_mask", "val_mask", "test_mask"):
            if getattr(self, name).shape != (n,):
                raise BundleError(f"{name} length != num_nodes")
        overlap = (self.train_mask.astype(int) + self.val_mask + self.test_mask) > 1
        if np.any(overlap):
            raise BundleError(f"masks overlap at node {int(np.argmax(overlap))}")
        # rows sorted, no self-loops or duplicates, and symmetric
        for v in range(n):
            row = self.indices[self.indptr[v]:self.indptr[v + 1]]
            if row.size:
                if np.any(np.diff(row) <= 0):
                    raise BundleError(f"row {v} has unsorted or duplicate neighbors")
                if np.any(row == v):
                    raise BundleError(f"self-loop at node {v}")
        adj = self.adjacency()
        if (adj != adj.T).nnz != 0:
            raise BundleError("adjacency is not symmetric")

    # -- views ---------------------------------------------------------------

    def adjacency(self, dtype=np.float32) -> sp.csr_matrix:
        """Adjacency as a scipy CSR matrix of ones (cheap view of the arrays)."""
        data = np.ones(self.indices.shape[0], dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.num_nodes, self.num_nodes))

    def mask_for(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return getattr(self, f"{split}_mask")

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.indices.shape[0] // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_array(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with i < j, sorted."""
        src = np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))
        dst = self.indices
        keep = src < dst
        return np.stack([src[keep], dst[keep].astype(np.int64)], axis=1)

    def _check_node(self, v: int):
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node id {v} out of range [0, {self.num_nodes})")

    # -- derived bundles -----------------------------------------------------

    def with_features(self, features: np.ndarray) -> "GraphBundle":
        return GraphBundle(self.num_nodes, self.num_features, self.num_classes,
                           self.indptr, self.indices, features, self.labels,
                           self.train_mask, self.val_mask, self.test_mask,
                           self.dataset_name)

    def with_labels(self, labels: np.ndarray) -> "GraphBundle":
        return GraphBundle(self.num_nodes, self.num_features, self.num_classes,
                           self.indptr, self.indices, self.features, labels,
                           self.train_mask, self.val_mask, self.test_mask,
                           self.dataset_name)

    def with_adjacency(self, indptr: np.ndarray, indices: np.ndarray) -> "GraphBundle":
        return GraphBundle(self.num_nodes, self.num_features, self.num_classes,
                           indptr, indices, self.features, self.labels,
                           self.train_mask, self.val_mask, self.test_mask,
                           self.dataset_name)


def symmetrize_edges(edges: np.ndarray, num_nodes: int) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Symmetric closure of an edge list; drops self-loops and duplicates.

    Returns (indptr, indices, dropped_self_loops, merged_duplicates).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        bad = edges[(edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1)][0]
        raise BundleError(f"edge ({bad[0]},{bad[1]}) references node id out of range")
    loops = edges[:, 0] == edges[:, 1]
    n_loops = int(loops.sum())
    edges = edges[~loops]
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    # unique (i, j) pairs sorted by (row, col) gives sorted CSR rows for free
    keys = both[:, 0] * num_nodes + both[:, 1]
    uniq = np.unique(keys)
    n_dups = (both.shape[0] - uniq.shape[0]) // 2
    rows = uniq // num_nodes
    cols = uniq % num_nodes
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return indptr, cols.astype(np.int32), n_loops, n_dups


def build_bundle(edges: np.ndarray, features: np.ndarray, labels: np.ndarray,
                 split_tags: np.ndarray, num_classes: int,
                 dataset_name: str = "unnamed") -> GraphBundle:
    """Assemble a bundle from raw parts, symmetrizing the edge list.

    ``split_tags`` holds one of train/val/test/none per node.
    """
    features = np.asarray(features, dtype=np.float32)
    n, d = features.shape
    indptr, indices, n_loops, n_dups = symmetrize_edges(edges, n)
    if n_loops or n_dups:
        log.warning("dropped %d self-loops, merged %d duplicate edges", n_loops, n_dups)
    tags = np.asarray(split_tags)
    masks = {s: tags == s for s in SPLITS}
    known = masks["train"] | masks["val"] | masks["test"] | (tags == "none")
    if not np.all(known):
        raise BundleError(f"unknown mask tag {tags[~known][0]!r}")
    return GraphBundle(n, d, num_classes, indptr, indices, features, labels,
                       masks["train"], masks["val"], masks["test"], dataset_name)


# -- degree / similarity primitives -------------------------------------------


def degree(g: GraphBundle, v: int) -> int:
    """Number of distinct undirected neighbors of v."""
    g._check_node(v)
    return int(g.indptr[v + 1] - g.indptr[v])


def _extreme_degree_node(g: GraphBundle, c: int, split: str, want_max: bool) -> int:
    if not 0 <= c < g.num_classes:
        raise ValueError(f"class {c} out of range [0, {g.num_classes})")
    candidates = np.flatnonzero(g.mask_for(split) & (g.labels == c))
    if candidates.size == 0:
        raise ValueError(f"class {c} has no nodes in the {split} split")
    degs = g.degrees()[candidates]
    # argmax/argmin take the first hit; candidates ascend, so ties break low
    pick = np.argmax(degs) if want_max else np.argmin(degs)
    return int(candidates[pick])


def max_degree_node_in_class(g: GraphBundle, c: int, split: str = "train") -> int:
    """Highest-degree node of class c in the split; ties go to the smallest id."""
    return _extreme_degree_node(g, c, split, want_max=True)


def min_degree_node_in_class(g: GraphBundle, c: int, split: str = "train") -> int:
    """Lowest-degree node of class c in the split; ties go to the smallest id."""
    return _extreme_degree_node(g, c, split, want_max=False)


def cosine_similarity(x_i: np.ndarray, x_j: np.ndarray) -> float:
    """Cosine of the angle between two feature vectors; 0 if either is all-zero."""
    x_i = np.asarray(x_i, dtype=np.float64).ravel()
    x_j = np.asarray(x_j, dtype=np.float64).ravel()
    if x_i.shape != x_j.shape:
        raise ValueError(f"length mismatch: {x_i.shape[0]} vs {x_j.shape[0]}")
    ni, nj = np.linalg.norm(x_i), np.linalg.norm(x_j)
    if ni == 0.0 or nj == 0.0:
        return 0.0
    return float(np.dot(x_i, x_j) / (ni * nj))


def edge_cosine_similarities(g: GraphBundle, edges: np.ndarray) -> np.ndarray:
    """Cosine similarity of the endpoint feature rows for each (i, j) pair."""
    feats = g.features.astype(np.float64)
    a = feats[edges[:, 0]]
    b = feats[edges[:, 1]]
    dots = np.einsum("ij,ij->i", a, b)
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    out = np.zeros(edges.shape[0])
    np.divide(dots, norms, out=out, where=norms > 0)
    return out


# -- bundle directory format ---------------------------------------------------


def save_bundle(g: GraphBundle, path: str | Path) -> None:
    """Write the five-file bundle directory format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": g.num_nodes,
        "num_features": g.num_features,
        "num_classes": g.num_classes,
        "dataset_name": g.dataset_name,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    edges = g.edge_array()
    with open(path / "edges.csv", "w") as f:
        f.writelines(f"{i},{j}\n" for i, j in edges)
    with open(path / "features.bin", "wb") as f:
        f.write(struct.pack("<II", g.num_nodes, g.num_features))
        f.write(np.ascontiguousarray(g.features, dtype="<f4").tobytes())
    with open(path / "labels.csv", "w") as f:
        f.writelines(f"{int(c)}\n" for c in g.labels)
    tags = np.full(g.num_nodes, "none", dtype=object)
    for s in SPLITS:
        tags[g.mask_for(s)] = s
    with open(path / "masks.csv", "w") as f:
        f.writelines(f"{t}\n" for t in tags)


def load_bundle(path: str | Path) -> GraphBundle:
    """Read a bundle directory, symmetrizing and validating on the way in."""
    path = Path(path)
    for name in BUNDLE_FILES:
        if not (path / name).is_file():
            raise BundleError(f"missing bundle file: {path / name}")
    meta = json.loads((path / "meta.json").read_text())
    try:
        n = int(meta["num_nodes"])
        d = int(meta["num_features"])
        c = int(meta["num_classes"])
        name = str(meta.get("dataset_name", path.name))
    except KeyError as e:
        raise BundleError(f"meta.json missing key {e}") from e

    edge_text = (path / "edges.csv").read_text().split()
    if edge_text:
        try:
            edges = np.array([[int(a) for a in line.split(",")] for line in edge_text],
                             dtype=np.int64)
        except ValueError as e:
            raise BundleError(f"malformed edges.csv: {e}") from e
        if edges.shape[1] != 2:
            raise BundleError("edges.csv must have two columns")
    else:
        edges = np.empty((0, 2), dtype=np.int64)

    with open(path / "features.bin", "rb") as f:
        header = f.read(8)
        if len(header) != 8:
            raise BundleError("features.bin shorter than its 8-byte header")
        fn, fd = struct.unpack("<II", header)
        if (fn, fd) != (n, d):
            raise BundleError(
                f"features.bin header ({fn}, {fd}) disagrees with meta ({n}, {d})")
        payload = np.frombuffer(f.read(), dtype="<f4")
    if payload.size != n * d:
        raise BundleError(f"features.bin payload has {payload.size} floats, expected {n * d}")
    features = payload.reshape(n, d)

    labels = np.loadtxt(path / "labels.csv", dtype=np.int64, ndmin=1)
    if labels.shape != (n,):
        raise BundleError(f"labels.csv has {labels.shape[0]} lines, expected {n}")
    tags = np.array((path / "masks.csv").read_text().split(), dtype=object)
    if tags.shape != (n,):
        raise BundleError(f"masks.csv has {tags.shape[0]} lines, expected {n}")

    return build_bundle(edges, features, labels, tags, num_classes=c, dataset_name=name)
