import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bfs_components, cycle_space_dim, eulerian_subgraph_count, graphs, omega_sum
from sgdiff.graph import (
    GraphError,
    OmegaMatrix,
    SpatialGraph,
    UnionFind,
    betti0,
    betti1,
    check_omega,
    creates_cycle,
    cycle_edges,
    dumps_graph,
    hierarchy_omega,
    load_graph,
    load_omega,
    neighbors,
    save_graph,
    save_omega,
    would_violate,
)

H = hierarchy_omega(4)


def g_of(n, edges):
    return SpatialGraph(np.zeros((n, 3)), edges)


class TestSpatialGraph:
    def test_canonicalises_and_sorts(self):
        g = g_of(3, [(2, 0, 1), (1, 0, 2)])
        assert g.edges == ((0, 1, 2), (0, 2, 1))

    @pytest.mark.parametrize("edges", [[(0, 0, 1)], [(0, 3, 1)], [(0, 1, 0)], [(0, 1, 1), (1, 0, 2)], [(-1, 1, 1)]])
    def test_rejects_bad_edges(self, edges):
        with pytest.raises(GraphError):
            g_of(3, edges)

    def test_rejects_non_finite_coords(self):
        with pytest.raises(GraphError):
            SpatialGraph(np.array([[0.0, np.nan, 0.0]]), [])

    def test_json_round_trip(self, tmp_path):
        g = SpatialGraph(np.arange(9.0).reshape(3, 3), [(0, 1, 2), (1, 2, 1)], {"name": "x"})
        save_graph(g, tmp_path / "g.json")
        assert load_graph(tmp_path / "g.json") == g
        assert json.loads(dumps_graph(g))["edges"] == [[0, 1, 2], [1, 2, 1]]

    def test_load_reports_file_name(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text(json.dumps({"nodes": [[0, 0, 0], [1, 1, 1]], "edges": [[0, 1, 1], [1, 0, 3]]}))
        with pytest.raises(GraphError, match="broken.json"):
            load_graph(p)

    def test_load_rejects_infinite_coordinate(self, tmp_path):
        p = tmp_path / "inf.json"
        p.write_text('{"nodes": [[0, 0, Infinity]], "edges": []}')
        with pytest.raises(GraphError):
            load_graph(p)


class TestOmega:
    def test_hierarchy_entries(self):
        expected = [[0, 0, 1, 1], [0, 0, 0, 1], [1, 0, 0, 0], [1, 1, 0, 0]]
        assert H.matrix.tolist() == expected

    def test_asymmetric_rejected(self):
        with pytest.raises(GraphError, match="symmetric"):
            OmegaMatrix(np.array([[0, 1], [0, 0]]), ("a", "b"))

    def test_non_binary_rejected(self):
        with pytest.raises(GraphError):
            OmegaMatrix(np.array([[0, 2], [2, 0]]), ("a", "b"))

    def test_file_round_trip(self, tmp_path):
        save_omega(H, tmp_path / "o.json")
        assert load_omega(tmp_path / "o.json") == H

    def test_asymmetric_file_rejected(self, tmp_path):
        p = tmp_path / "o.json"
        p.write_text(json.dumps({"labels": ["a", "b"], "matrix": [[0, 1], [0, 0]]}))
        with pytest.raises(GraphError):
            load_omega(p)


class TestNeighbors:
    def test_triangle(self):
        assert neighbors(g_of(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]), 0) == {1, 2}

    def test_isolated(self):
        assert neighbors(g_of(3, [(1, 2, 1)]), 0) == set()

    def test_path_middle(self):
        assert neighbors(g_of(3, [(0, 1, 1), (1, 2, 1)]), 1) == {0, 2}

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            neighbors(g_of(2, []), 2)

    @given(graphs())
    def test_symmetric(self, g):
        for v in range(g.node_count):
            for u in neighbors(g, v):
                assert v in neighbors(g, u)


class TestCheckOmega:
    def test_empty_edge_set(self):
        assert check_omega(g_of(4, []), H).valid

    def test_level_gap_two_is_one_violation(self):
        report = check_omega(g_of(3, [(0, 1, 1), (1, 2, 3)]), H)
        assert len(report.violations) == 1
        assert report.violations[0][0] == 1

    def test_adjacent_levels_allowed(self):
        assert not check_omega(g_of(3, [(0, 1, 1), (1, 2, 2)]), H)

    def test_label_beyond_omega(self):
        with pytest.raises(GraphError):
            check_omega(g_of(2, [(0, 1, 5)]), H)

    def test_forest_mode_reports_cycle(self):
        report = check_omega(g_of(4, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (2, 3, 1)]), None, "forest")
        assert sorted(e[:2] for e in report.cycle_edges) == [(0, 1), (0, 2), (1, 2)]

    @given(graphs(max_nodes=8))
    def test_agrees_with_ordered_pair_sum(self, g):
        # each unordered conflicting pair appears twice in the ordered sum
        assert 2 * len(check_omega(g, H).violations) == omega_sum(g, H.matrix)

    @given(graphs(max_nodes=8), st.data())
    def test_deletion_never_creates_violations(self, g, data):
        if check_omega(g, H):
            return
        keep = data.draw(st.lists(st.booleans(), min_size=g.edge_count, max_size=g.edge_count))
        sub = g.with_edges([e for e, k in zip(g.edges, keep) if k])
        assert not check_omega(sub, H)


class TestWouldViolate:
    def test_empty_graph(self):
        assert not would_violate(g_of(3, []), 0, 1, 4, H)

    def test_star_gap_two(self):
        assert would_violate(g_of(3, [(0, 1, 1)]), 0, 2, 3, H)

    def test_star_adjacent_level(self):
        assert not would_violate(g_of(3, [(0, 1, 1)]), 0, 2, 2, H)

    def test_existing_edge_is_error(self):
        with pytest.raises(GraphError):
            would_violate(g_of(3, [(0, 1, 1)]), 0, 1, 1, H)

    @given(graphs(max_nodes=8), st.data())
    def test_agrees_with_full_check(self, g, data):
        if g.node_count < 2 or check_omega(g, H):
            return
        present = set(g.edge_dict())
        free = [(i, j) for i in range(g.node_count) for j in range(i + 1, g.node_count) if (i, j) not in present]
        if not free:
            return
        i, j = data.draw(st.sampled_from(free))
        label = data.draw(st.integers(1, 4))
        assert would_violate(g, i, j, label, H) == bool(check_omega(g.add_edge(i, j, label), H))


class TestBetti:
    def test_isolated_nodes(self):
        assert betti0(g_of(5, [])) == 5

    def test_spanning_tree(self):
        assert betti0(g_of(7, [(k, k + 1, 1) for k in range(6)])) == 1

    def test_two_triangles(self):
        tri = [(0, 1, 1), (1, 2, 1), (0, 2, 1)]
        assert betti0(g_of(6, tri + [(i + 3, j + 3, l) for i, j, l in tri])) == 2

    def test_forest_has_no_cycles(self):
        assert betti1(g_of(6, [(0, 1, 1), (1, 2, 1), (3, 4, 1)])) == 0

    def test_triangle(self):
        assert betti1(g_of(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])) == 1

    def test_bowtie(self):
        g = g_of(5, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (0, 3, 1), (3, 4, 1), (0, 4, 1)])
        assert betti1(g) == 2
        assert eulerian_subgraph_count(5, g.edges) == 4

    @given(graphs(max_nodes=12))
    def test_betti0_matches_bfs(self, g):
        assert betti0(g) == bfs_components(g.node_count, g.edges)

    @given(graphs(max_nodes=12))
    def test_betti1_matches_cycle_space(self, g):
        assert betti1(g) == cycle_space_dim(g.node_count, g.edges)

    @given(graphs(max_nodes=7))
    @settings(max_examples=40)
    def test_betti1_matches_even_subgraph_count(self, g):
        if g.edge_count <= 14:
            assert 2 ** betti1(g) == eulerian_subgraph_count(g.node_count, g.edges)

    @given(graphs(max_nodes=12))
    def test_euler_relation(self, g):
        assert betti1(g) == g.edge_count - g.node_count + betti0(g)


class TestCycles:
    def test_closing_a_path(self):
        assert creates_cycle(g_of(3, [(0, 1, 1), (1, 2, 1)]), 0, 2)

    def test_bridging_components(self):
        assert not creates_cycle(g_of(4, [(0, 1, 1), (2, 3, 1)]), 1, 2)

    def test_any_chord_of_a_tree(self):
        rng = np.random.default_rng(3)
        edges = [(int(rng.integers(0, k)), k, 1) for k in range(1, 10)]
        tree = g_of(10, edges)
        present = set(tree.edge_dict())
        for i in range(10):
            for j in range(i + 1, 10):
                if (i, j) not in present:
                    assert creates_cycle(tree, i, j)
                    assert betti1(tree.add_edge(i, j, 1)) == 1

    def test_present_edge_is_error(self):
        with pytest.raises(GraphError):
            creates_cycle(g_of(2, [(0, 1, 1)]), 0, 1)

    @given(graphs(max_nodes=9), st.data())
    def test_matches_betti_increment(self, g, data):
        present = set(g.edge_dict())
        free = [(i, j) for i in range(g.node_count) for j in range(i + 1, g.node_count) if (i, j) not in present]
        if not free:
            return
        i, j = data.draw(st.sampled_from(free))
        assert creates_cycle(g, i, j) == (betti1(g.add_edge(i, j, 1)) == betti1(g) + 1)

    @given(graphs(max_nodes=9))
    def test_cycle_edges_are_exactly_non_bridges(self, g):
        on_cycle = set(e[:2] for e in cycle_edges(g))
        for e in g.edges:
            rest = [f for f in g.edges if f != e]
            is_bridge = bfs_components(g.node_count, rest) > bfs_components(g.node_count, g.edges)
            assert (e[:2] in on_cycle) == (not is_bridge)

    def test_union_find_components(self):
        uf = UnionFind(5)
        uf.union(0, 1)
        uf.union(3, 4)
        assert uf.connected(0, 1) and not uf.connected(1, 3)
        assert uf.components == 3
