import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphpoison.bundle import (BundleError, build_bundle, cosine_similarity,
                                degree, edge_cosine_similarities,
                                max_degree_node_in_class,
                                min_degree_node_in_class, symmetrize_edges)

from conftest import dense_adjacency, toy_bundle


class TestConstruction:
    def test_symmetrization_dedups_reversed_pairs(self):
        g = toy_bundle([(1, 2), (2, 1)], labels=[0, 0, 0])
        assert g.num_edges == 1
        assert degree(g, 1) == 1
        assert degree(g, 2) == 1

    def test_self_loops_dropped(self):
        g = toy_bundle([(0, 0), (0, 1)], labels=[0, 0])
        assert g.num_edges == 1
        assert degree(g, 0) == 1

    def test_label_out_of_range_rejected(self):
        with pytest.raises(BundleError, match="label 9"):
            toy_bundle([(0, 1)], labels=[0, 9], num_classes=7)

    def test_edge_out_of_range_rejected(self):
        with pytest.raises(BundleError, match="out of range"):
            toy_bundle([(0, 5)], labels=[0, 0])

    def test_overlapping_masks_rejected(self):
        g = toy_bundle([(0, 1)], labels=[0, 1])
        with pytest.raises(BundleError, match="masks overlap"):
            type(g)(g.num_nodes, g.num_features, g.num_classes, g.indptr, g.indices,
                    g.features, g.labels, np.array([True, True]),
                    np.array([True, False]), np.array([False, False]))

    def test_non_finite_features_rejected(self):
        feats = np.ones((2, 3), dtype=np.float32)
        feats[1, 2] = np.nan
        with pytest.raises(BundleError, match="non-finite"):
            toy_bundle([(0, 1)], labels=[0, 0], features=feats)

    def test_bundle_arrays_frozen(self):
        g = toy_bundle([(0, 1)], labels=[0, 1])
        with pytest.raises(ValueError):
            g.features[0, 0] = 5.0


class TestDegree:
    def test_path_graph_middle(self):
        g = toy_bundle([(0, 1), (1, 2)], labels=[0, 0, 0])
        assert degree(g, 1) == 2

    def test_isolated_node(self):
        g = toy_bundle([(0, 1)], labels=[0, 0, 0])
        assert degree(g, 2) == 0

    def test_out_of_range(self):
        g = toy_bundle([(0, 1)], labels=[0, 0])
        with pytest.raises(IndexError):
            degree(g, 2)

    def test_matches_dense_popcount_oracle(self, sbm30):
        a = dense_adjacency(sbm30)
        for v in range(sbm30.num_nodes):
            assert degree(sbm30, v) == a[v].sum()


class TestClassDegreeSearch:
    def graph(self):
        # node 2 has degree 3; node 5 degree 1; both class 0
        edges = [(2, 0), (2, 1), (2, 3), (5, 4)]
        labels = [1, 1, 0, 1, 1, 0]
        return toy_bundle(edges, labels)

    def test_single_node_class(self):
        g = toy_bundle([(0, 1)], labels=[0, 1])
        assert max_degree_node_in_class(g, 1) == 1
        assert min_degree_node_in_class(g, 1) == 1

    def test_max_and_min(self):
        g = self.graph()
        assert max_degree_node_in_class(g, 0) == 2
        assert min_degree_node_in_class(g, 0) == 5

    def test_tie_breaks_to_smallest_id_max(self):
        # nodes 4 and 7 both degree 3, class 0
        edges = [(4, 0), (4, 1), (4, 2), (7, 3), (7, 5), (7, 6)]
        labels = [1, 1, 1, 1, 0, 1, 1, 0]
        g = toy_bundle(edges, labels)
        assert max_degree_node_in_class(g, 0) == 4

    def test_tie_breaks_to_smallest_id_min(self):
        edges = [(3, 0), (9, 1)]
        labels = [1, 1, 1, 0, 1, 1, 1, 1, 1, 0]
        g = toy_bundle(edges, labels)
        assert min_degree_node_in_class(g, 0) == 3

    def test_empty_class_in_split_rejected(self):
        g = toy_bundle([(0, 1)], labels=[0, 0], num_classes=2)
        with pytest.raises(ValueError, match="no nodes"):
            max_degree_node_in_class(g, 1)

    def test_agrees_with_exhaustive_scan(self, sbm30):
        degs = dense_adjacency(sbm30).sum(axis=1)
        for c in range(sbm30.num_classes):
            ids = [v for v in range(sbm30.num_nodes)
                   if sbm30.train_mask[v] and sbm30.labels[v] == c]
            best_max = min(v for v in ids if degs[v] == max(degs[i] for i in ids))
            best_min = min(v for v in ids if degs[v] == min(degs[i] for i in ids))
            assert max_degree_node_in_class(sbm30, c) == best_max
            assert min_degree_node_in_class(sbm30, c) == best_min


class TestCosineSimilarity:
    def test_parallel_vectors(self):
        x = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(x, 2 * x) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)

    def test_analytic_value(self):
        assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(0.7071, abs=1e-4)

    def test_zero_norm_is_zero(self):
        assert cosine_similarity([0, 0], [1, 2]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_similarity([1, 2], [1, 2, 3])

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=6),
           st.floats(0.01, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_symmetric_and_scale_invariant(self, vals, lam):
        rng = np.random.default_rng(len(vals))
        a = np.array(vals)
        b = rng.normal(size=a.size)
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-6)
        assert cosine_similarity(lam * a, b) == pytest.approx(cosine_similarity(a, b),
                                                              abs=1e-6)

    def test_edgewise_matches_pairwise(self, sbm30):
        edges = sbm30.edge_array()
        sims = edge_cosine_similarities(sbm30, edges)
        for (i, j), s in zip(edges[:20], sims[:20]):
            assert s == pytest.approx(
                cosine_similarity(sbm30.features[i], sbm30.features[j]), abs=1e-6)


def test_symmetrize_counts_loops_and_dups():
    indptr, indices, loops, dups = symmetrize_edges(
        np.array([[0, 1], [1, 0], [2, 2], [0, 1]]), 3)
    assert loops == 1
    assert dups == 2
    assert indices.tolist() == [1, 0]
