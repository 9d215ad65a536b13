import numpy as np
import pytest

from graphpoison.bundle import degree
from graphpoison.sbm import SbmParams, generate_sbm

from conftest import dense_adjacency


def params(**kw):
    defaults = dict(block_sizes=(3, 3), p_intra=1.0, p_inter=0.0,
                    prototypes=np.eye(2), noise_scale=0.0, seed=0)
    defaults.update(kw)
    return SbmParams(**defaults)


def test_disjoint_triangles():
    g = generate_sbm(params())
    assert g.num_edges == 6  # two 3-cliques
    a = dense_adjacency(g)
    assert a[:3, 3:].sum() == 0
    assert (a[:3, :3].sum(axis=1) == 2).all()


def test_labels_are_block_ids():
    g = generate_sbm(params())
    assert g.labels.tolist() == [0, 0, 0, 1, 1, 1]


def test_same_seed_is_byte_identical():
    a = generate_sbm(params(p_intra=0.7, p_inter=0.1, noise_scale=0.3, seed=11))
    b = generate_sbm(params(p_intra=0.7, p_inter=0.1, noise_scale=0.3, seed=11))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.indices.tobytes() == b.indices.tobytes()
    assert a.indptr.tobytes() == b.indptr.tobytes()


def test_different_seeds_differ():
    a = generate_sbm(params(p_intra=0.5, p_inter=0.2, seed=1))
    b = generate_sbm(params(p_intra=0.5, p_inter=0.2, seed=2))
    assert a.indices.tobytes() != b.indices.tobytes()


def test_edge_set_matches_reference_prng_walk():
    p = params(block_sizes=(20, 20), p_intra=0.8, p_inter=0.05, seed=0,
               prototypes=np.eye(2))
    g = generate_sbm(p)
    # independent replay: one uniform per (i, j) pair, i < j, lexicographic
    rng = np.random.default_rng([0, 0])
    labels = np.repeat([0, 1], 20)
    expected = set()
    for i in range(40):
        for j in range(i + 1, 40):
            prob = 0.8 if labels[i] == labels[j] else 0.05
            if rng.random() < prob:
                expected.add((i, j))
    got = {tuple(e) for e in g.edge_array()}
    assert got == expected


def test_masks_split_per_class_by_id():
    g = generate_sbm(params(block_sizes=(10, 10), p_intra=0.5, p_inter=0.1))
    for c, offset in [(0, 0), (1, 10)]:
        ids = np.arange(offset, offset + 10)
        assert g.train_mask[ids[:6]].all()
        assert g.val_mask[ids[6:8]].all()
        assert g.test_mask[ids[8:]].all()


def test_features_are_prototype_plus_noise():
    protos = np.array([[2.0, 0.0], [0.0, 3.0]])
    g = generate_sbm(params(prototypes=protos, noise_scale=0.0))
    np.testing.assert_allclose(g.features[:3], [[2.0, 0.0]] * 3)
    np.testing.assert_allclose(g.features[3:], [[0.0, 3.0]] * 3)


def test_zero_block_rejected():
    with pytest.raises(ValueError, match="positive"):
        params(block_sizes=(3, 0))


def test_degree_oracle_on_random_instance():
    g = generate_sbm(params(block_sizes=(15, 15), p_intra=0.4, p_inter=0.1, seed=5))
    a = dense_adjacency(g)
    assert (a == a.T).all()
    for v in range(g.num_nodes):
        assert degree(g, v) == a[v].sum()
