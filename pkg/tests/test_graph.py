"""Graph construction, parsing, and structural invariants."""

import io

import numpy as np
import pytest

from ndls.errors import DataError
from ndls.graph import (
    build_graph,
    connected_components,
    load_graph,
    read_edge_list,
)

from helpers import path_graph, random_connected_graph, two_node_graph


class TestLoadGraph:
    def test_single_edge(self):
        g = load_graph(io.StringIO("0 1\n"))
        assert g.n == 2 and g.m == 1
        np.testing.assert_array_equal(g.degrees_tilde, [2, 2])

    def test_duplicate_and_reverse_edges_collapse(self):
        g1 = load_graph(io.StringIO("0 1\n"))
        g2 = load_graph(io.StringIO("0 1\n1 0\n0 1\n"))
        assert (g1.adjacency != g2.adjacency).nnz == 0

    def test_path_counts(self):
        g = path_graph(3)
        np.testing.assert_array_equal(g.degrees_tilde, [2, 3, 2])
        assert 2 * g.m + g.n == 7

    def test_tabs_comments_blank_lines(self):
        text = "# header\n0\t1\n\n1 2  # inline comment\n"
        g = load_graph(io.StringIO(text))
        assert g.n == 3 and g.m == 2

    def test_non_integer_token_reports_line(self):
        with pytest.raises(DataError, match="line 2"):
            load_graph(io.StringIO("0 1\n1 x\n"))

    def test_wrong_column_count_reports_line(self):
        with pytest.raises(DataError, match="line 1"):
            load_graph(io.StringIO("0 1 2\n"))

    def test_node_count_bounds(self):
        with pytest.raises(DataError, match="out of bounds"):
            load_graph(io.StringIO("0 5\n"), node_count=3)

    def test_negative_id(self):
        with pytest.raises(DataError, match="negative"):
            build_graph(np.array([[0, -1]]))

    def test_declared_node_count_adds_isolated_nodes(self):
        g = load_graph(io.StringIO("0 1\n"), node_count=4)
        assert g.n == 4
        np.testing.assert_array_equal(g.degrees_tilde, [2, 2, 1, 1])

    def test_empty_without_node_count(self):
        with pytest.raises(DataError, match="empty"):
            load_graph(io.StringIO(""))

    def test_asymmetric_input_rejected_without_symmetrize(self):
        with pytest.raises(DataError, match="not symmetric"):
            load_graph(io.StringIO("0 1\n"), symmetrize=False)

    def test_presymmetrized_input_accepted(self):
        g = load_graph(io.StringIO("0 1\n1 0\n"), symmetrize=False)
        assert g.m == 1

    def test_input_self_loops_collapse_with_added_ones(self):
        g = load_graph(io.StringIO("0 0\n0 1\n"))
        np.testing.assert_array_equal(g.degrees_tilde, [2, 2])

    def test_read_edge_list_array(self):
        edges = read_edge_list(io.StringIO("3 4\n1 2\n"))
        np.testing.assert_array_equal(edges, [[3, 4], [1, 2]])


class TestStructuralInvariants:
    @pytest.mark.parametrize("index", range(6))
    def test_invariants_on_random_graphs(self, index):
        """Self-loops present, symmetric, row lengths = d̃, sum d̃ = 2m+n."""
        g = random_connected_graph(index, max_n=120)
        adj = g.adjacency
        for i in range(g.n):
            row = adj.indices[adj.indptr[i]:adj.indptr[i + 1]]
            assert i in row
            assert len(row) == g.degrees_tilde[i]
        assert (adj != adj.T).nnz == 0
        assert g.degrees_tilde.sum() == 2 * g.m + g.n

    def test_adjacency_is_readonly(self):
        g = two_node_graph()
        with pytest.raises(ValueError):
            g.adjacency.data[0] = 5.0
        with pytest.raises(ValueError):
            g.degrees_tilde[0] = 7


class TestComponents:
    def test_connected_path_single_component(self):
        assert path_graph(5).num_components == 1

    def test_two_disjoint_edges(self):
        g = build_graph(np.array([[0, 1], [2, 3]]))
        assert g.num_components == 2
        np.testing.assert_array_equal(np.sort(g.component_sizes), [2, 2])
        np.testing.assert_array_equal(g.component_edge_counts, [1, 1])
        labels = connected_components(g)
        assert labels[0] == labels[1] != labels[2] == labels[3]

    def test_isolated_node_own_component(self):
        g = build_graph(np.array([[0, 1]]), node_count=3)
        assert g.num_components == 2
        comp = g.component_id[2]
        assert g.component_sizes[comp] == 1
        assert g.component_edge_counts[comp] == 0

    def test_labels_stable_under_permutation(self):
        """Permuting node ids permutes the partition, up to relabeling."""
        edges = np.array([[0, 1], [1, 2], [3, 4]])
        g = build_graph(edges, node_count=6)
        rng = np.random.default_rng(3)
        perm = rng.permutation(6)
        g2 = build_graph(perm[edges], node_count=6)
        for i in range(6):
            for j in range(6):
                same = g.component_id[i] == g.component_id[j]
                same2 = g2.component_id[perm[i]] == g2.component_id[perm[j]]
                assert same == same2

    def test_component_stats_shape(self):
        g = build_graph(np.array([[0, 1], [2, 3]]))
        assert g.component_stats.shape == (2, 2)
        np.testing.assert_array_equal(
            g.component_denominators(),
            2.0 * g.component_edge_counts + g.component_sizes)

    def test_undirected_edges_roundtrip(self):
        g = random_connected_graph(4, max_n=60)
        rebuilt = build_graph(g.undirected_edges(), node_count=g.n)
        assert (g.adjacency != rebuilt.adjacency).nnz == 0
