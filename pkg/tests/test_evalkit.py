import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import graphs, kl_closed_form
from sgdiff.evalkit import (
    FEATURES,
    balanced_accuracy,
    compare_corpora,
    graph_stats,
    kl_feature,
    kl_from_counts,
    link_pred_metrics,
    macro_f1,
    validity_rate,
)
from sgdiff.graph import GraphError, SpatialGraph, hierarchy_omega

H = hierarchy_omega(4)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


class TestGraphStats:
    def test_single_edge(self):
        s = graph_stats(SpatialGraph(np.array([[0.0, 0, 0], [2.0, 0, 0]]), [(0, 1, 1)]))
        assert s.lengths.tolist() == [2.0] and s.angles.size == 0

    def test_right_angle(self):
        s = graph_stats(SpatialGraph(np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]), [(0, 1, 1), (0, 2, 1)]))
        assert s.angles == pytest.approx([90.0])

    def test_planar_star(self):
        pts = [[0.0, 0, 0]] + [[np.cos(a), np.sin(a), 0.0] for a in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
        s = graph_stats(SpatialGraph(np.array(pts), [(0, 1, 1), (0, 2, 1), (0, 3, 1)]))
        assert np.allclose(s.angles, 120.0, atol=1e-9)
        assert s.degrees.tolist() == [3, 1, 1, 1]

    def test_zero_length_edge_flagged(self):
        s = graph_stats(SpatialGraph(np.array([[0.0, 0, 0], [0.0, 0, 0], [1.0, 0, 0]]), [(0, 1, 1), (0, 2, 1)]))
        assert s.zero_length_edges == [(0, 1, 1)]
        assert s.angles.size == 0 and sorted(s.lengths.tolist()) == [0.0, 1.0]

    @settings(deadline=None)
    @given(graphs(max_nodes=9), st.integers(0, 2**32 - 1))
    def test_rotation_and_relabeling_invariance(self, g, seed):
        rng = np.random.default_rng(seed)
        R = random_rotation(rng)
        perm = rng.permutation(g.node_count)
        inv = np.argsort(perm)
        moved = SpatialGraph(g.coords[perm] @ R.T, [(int(inv[i]), int(inv[j]), lab) for i, j, lab in g.edges])
        a, b = graph_stats(g), graph_stats(moved)
        assert np.allclose(np.sort(a.lengths), np.sort(b.lengths), atol=1e-9)
        assert np.allclose(np.sort(a.angles), np.sort(b.angles), atol=1e-6)
        assert sorted(a.degrees) == sorted(b.degrees)
        assert (a.betti0, a.betti1, a.edge_count) == (b.betti0, b.betti1, b.edge_count)
        assert np.all((a.angles >= 0) & (a.angles <= 180))


class TestKL:
    def test_closed_form_case(self):
        p_counts = np.array([500_000.0, 500_000.0])
        q_counts = np.array([250_000.0, 750_000.0])
        expected = kl_closed_form([0.5, 0.5], [0.25, 0.75])
        assert expected == pytest.approx(0.1438, abs=1e-4)
        assert kl_from_counts(p_counts, q_counts) == pytest.approx(expected, abs=1e-5)

    def test_smoothing_matches_hand_computation(self):
        assert kl_from_counts(np.array([3.0, 0.0]), np.array([0.0, 3.0])) == pytest.approx(
            kl_closed_form([4 / 5, 1 / 5], [1 / 5, 4 / 5]), abs=1e-12)

    @given(st.lists(graphs(max_nodes=8, min_nodes=2), min_size=1, max_size=5))
    @settings(deadline=None, max_examples=40)
    def test_identical_corpora_give_zero(self, corpus):
        stats = [graph_stats(g) for g in corpus]
        for f in FEATURES:
            assert kl_feature(stats, stats, f) == 0.0

    def test_disjoint_support_is_finite_positive(self):
        near = [graph_stats(SpatialGraph(np.array([[0.0, 0, 0], [1.0, 0, 0]]), [(0, 1, 1)]))]
        far = [graph_stats(SpatialGraph(np.array([[0.0, 0, 0], [9.0, 0, 0]]), [(0, 1, 1)]))]
        ref = near + [graph_stats(SpatialGraph(np.array([[0.0, 0, 0], [2.0, 0, 0]]), [(0, 1, 1)]))]
        value = kl_feature(ref, far, "length", bins=10)
        assert np.isfinite(value) and value > 0

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            kl_feature([], [graph_stats(SpatialGraph(np.zeros((1, 3)), []))], "degree")


class TestValidity:
    def test_rates(self):
        good = SpatialGraph(np.zeros((3, 3)), [(0, 1, 1), (1, 2, 2)])
        bad = SpatialGraph(np.zeros((3, 3)), [(0, 1, 1), (1, 2, 3)])
        assert validity_rate([good] * 10, H) == 100.0
        assert validity_rate([good] * 9 + [bad], H) == 90.0

    def test_structural_flag(self):
        tri = SpatialGraph(np.zeros((3, 3)), [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
        assert validity_rate([tri], H) == 100.0
        assert validity_rate([tri], H, "forest") == 0.0

    def test_compare_report_fields(self):
        g = SpatialGraph(np.eye(3), [(0, 1, 1), (1, 2, 2)])
        rep = compare_corpora([g], [g], H, "forest")
        assert rep["kl_x1e3"] == {f: 0.0 for f in FEATURES}
        assert rep["betti0_abs_mean_diff"] == 0.0 and rep["semantic_validity_pct"] == 100.0


class TestLinkMetrics:
    def test_perfect(self):
        truth = SpatialGraph(np.zeros((4, 3)), [(0, 1, 1), (1, 2, 2), (2, 3, 1)])
        given_ = truth.with_edges(truth.edges[:1])
        assert link_pred_metrics(truth, truth, given_) == (100.0, 1.0)

    def test_no_new_edges_has_zero_edge_recall(self):
        truth = SpatialGraph(np.zeros((5, 3)), [(0, 1, 1), (1, 2, 2), (2, 3, 1), (3, 4, 2)])
        given_ = truth.with_edges(truth.edges[:2])
        acc, _ = link_pred_metrics(given_, truth, given_)
        # recall 1 on the no-edge class, 0 on both edge classes
        assert acc == pytest.approx(100.0 / 3)

    def test_crafted_two_class_case(self):
        y_true = np.array([1] * 8 + [0] * 2)
        y_pred = np.array([1] * 8 + [0, 1])
        assert balanced_accuracy(y_true, y_pred) == pytest.approx(75.0)
        f1_edge = 2 * 8 / (2 * 8 + 1)
        f1_none = 2 * 1 / (2 * 1 + 1)
        assert macro_f1(y_true, y_pred) == pytest.approx((f1_edge + f1_none) / 2)

    def test_crafted_case_through_graphs(self):
        # five nodes: ten pairs, eight true edges of class 1 and two empty pairs
        pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
        truth = SpatialGraph(np.zeros((5, 3)), [(i, j, 1) for i, j in pairs[:8]])
        pred = SpatialGraph(np.zeros((5, 3)), [(i, j, 1) for i, j in pairs[:8]] + [(*pairs[9], 1)])
        given_ = SpatialGraph(np.zeros((5, 3)), [])
        acc, _ = link_pred_metrics(pred, truth, given_)
        assert acc == pytest.approx(75.0)

    def test_node_set_mismatch(self):
        with pytest.raises(GraphError):
            link_pred_metrics(SpatialGraph(np.zeros((3, 3)), []), SpatialGraph(np.zeros((4, 3)), []),
                              SpatialGraph(np.zeros((4, 3)), []))
