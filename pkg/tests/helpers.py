"""Shared graph builders for the test suite."""

import numpy as np

from ndls.datasets import erdos_renyi_graph, preferential_attachment_graph
from ndls.graph import build_graph


def path_graph(n=3):
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return build_graph(edges, node_count=n)


def two_node_graph():
    return build_graph(np.array([[0, 1]]))


def complete_graph(n):
    rows, cols = np.triu_indices(n, k=1)
    return build_graph(np.column_stack([rows, cols]), node_count=n)


def star_graph(leaves):
    edges = np.column_stack([np.zeros(leaves, dtype=np.int64),
                             np.arange(1, leaves + 1)])
    return build_graph(edges, node_count=leaves + 1)


def connected_er(n, p, seed, attempts=200):
    """Rejection-sampled connected uniform random graph."""
    for attempt in range(attempts):
        g = erdos_renyi_graph(n, p, seed=seed * attempts + attempt,
                              connect=False)
        if g.num_components == 1:
            return g
    raise RuntimeError(f"no connected sample at n={n}, p={p}")


def random_connected_graph(index, max_n=200):
    """Mixed corpus: even indices uniform random, odd indices power-law."""
    rng = np.random.default_rng(index)
    n = int(rng.integers(16, max_n + 1))
    if index % 2 == 0:
        return connected_er(n, min(1.0, 2.5 * np.log(n) / n), seed=index)
    return preferential_attachment_graph(n, int(rng.integers(2, 4)), seed=index)
