import numpy as np
import pytest

from graphpoison.bundle import GraphBundle, build_bundle, load_bundle, save_bundle
from graphpoison.datasets import cora
from graphpoison.sbm import SbmParams, generate_sbm


def toy_bundle(edges, labels, num_classes=None, features=None, tags=None, d=4):
    """Small hand-built bundle for unit tests."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if features is None:
        rng = np.random.default_rng(7)
        features = rng.random((n, d)).astype(np.float32) + 0.1
    if tags is None:
        tags = np.full(n, "train", dtype=object)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return build_bundle(np.asarray(edges).reshape(-1, 2), features, labels, tags,
                        num_classes=num_classes, dataset_name="toy")


@pytest.fixture(scope="session")
def cora_bundle(tmp_path_factory):
    """The real citation graph, round-tripped through the bundle directory format."""
    g = cora()
    path = tmp_path_factory.mktemp("bundles") / "cora"
    save_bundle(g, path)
    return load_bundle(path)


@pytest.fixture(scope="session")
def sbm30():
    """Two-block 30-node graph with prototype features, used as an oracle target."""
    protos = np.zeros((2, 8))
    protos[0, :4] = 1.0
    protos[1, 4:] = 1.0
    return generate_sbm(SbmParams(block_sizes=(15, 15), p_intra=0.5, p_inter=0.05,
                                  prototypes=protos, noise_scale=0.05, seed=3))


def dense_adjacency(g: GraphBundle) -> np.ndarray:
    """Independent dense reconstruction used by brute-force oracles."""
    a = np.zeros((g.num_nodes, g.num_nodes), dtype=int)
    for v in range(g.num_nodes):
        for u in g.indices[g.indptr[v]:g.indptr[v + 1]]:
            a[v, u] = 1
    return a
