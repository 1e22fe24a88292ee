"""Graph ingestion and structure.

Every graph in this package is undirected, unweighted, and stored as a CSR
adjacency matrix that already includes one self-loop per node.  Duplicate
input edges are collapsed and both directions of each edge are present, so
the row length of node ``i`` equals its degree-plus-one.  Connected
components are labeled at construction time because the stationary limit of
the propagation operator is defined per component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _connected_components

from .errors import DataError


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with self-loops.

    Attributes
    ----------
    adjacency : scipy.sparse.csr_matrix
        A + I with all entries equal to 1.0 (float64).
    degrees_tilde : ndarray of int64
        Per-node degree plus one; equals the CSR row lengths.
    component_id : ndarray of int64
        Connected-component label per node.
    component_sizes : ndarray of int64
        Node count per component.
    component_edge_counts : ndarray of int64
        Undirected edge count per component, self-loops excluded.
    """

    adjacency: sp.csr_matrix
    degrees_tilde: np.ndarray
    component_id: np.ndarray
    component_sizes: np.ndarray
    component_edge_counts: np.ndarray

    @property
    def n(self) -> int:
        """Node count."""
        return self.adjacency.shape[0]

    @property
    def m(self) -> int:
        """Undirected edge count, self-loops excluded."""
        return int(self.adjacency.nnz - self.n) // 2

    @property
    def num_components(self) -> int:
        return len(self.component_sizes)

    @property
    def row_offsets(self) -> np.ndarray:
        return self.adjacency.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.adjacency.indices

    @property
    def component_stats(self) -> np.ndarray:
        """Per-component (n_g, m_g) as an (num_components, 2) array."""
        return np.column_stack([self.component_sizes, self.component_edge_counts])

    def component_denominators(self) -> np.ndarray:
        """Per-component 2*m_g + n_g (float64)."""
        return (2 * self.component_edge_counts + self.component_sizes).astype(np.float64)

    def undirected_edges(self) -> np.ndarray:
        """The (m, 2) array of undirected edges with u < v, self-loops excluded."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        return np.column_stack([coo.row, coo.col]).astype(np.int64)


def read_edge_list(source: str | IO[str]) -> np.ndarray:
    """Parse an edge list of whitespace/tab-separated "u v" pairs.

    Lines may carry ``#`` comments; blank lines are skipped.  Returns an
    (k, 2) int64 array.  Raises :class:`DataError` with the offending line
    number on malformed input.
    """
    if hasattr(source, "read"):
        return _parse_edge_lines(source)
    with open(source, "r", encoding="utf-8") as handle:
        return _parse_edge_lines(handle)


def _parse_edge_lines(handle: IO[str]) -> np.ndarray:
    us: list[int] = []
    vs: list[int] = []
    for lineno, raw in enumerate(handle, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"edge list line {lineno}: expected 'u v', got {raw.strip()!r}")
        try:
            us.append(int(parts[0]))
            vs.append(int(parts[1]))
        except ValueError:
            raise DataError(
                f"edge list line {lineno}: non-integer node id in {raw.strip()!r}"
            ) from None
    if not us:
        return np.empty((0, 2), dtype=np.int64)
    return np.column_stack([np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64)])


def build_graph(edges: np.ndarray, node_count: int | None = None,
                symmetrize: bool = True) -> Graph:
    """Build a :class:`Graph` from an (k, 2) array of edges.

    Self-loops are added exactly once per node, duplicate edges collapse,
    and with ``symmetrize`` both directions of every pair are inserted.
    With ``symmetrize=False`` the input must already be symmetric.
    """
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise DataError(f"edge array must have shape (k, 2), got {edges.shape}")

    if edges.size and edges.min() < 0:
        bad = int(edges[edges < 0].flat[0])
        raise DataError(f"negative node id {bad} in edge list")
    if node_count is None:
        if edges.size == 0:
            raise DataError("cannot infer node count from an empty edge list")
        n = int(edges.max()) + 1
    else:
        n = int(node_count)
        if n <= 0:
            raise DataError(f"node_count must be positive, got {n}")
        if edges.size and edges.max() >= n:
            bad = int(edges[edges >= n].flat[0])
            raise DataError(f"node id {bad} out of bounds for declared node_count {n}")

    u, v = edges[:, 0], edges[:, 1]
    if symmetrize:
        rows = np.concatenate([u, v, np.arange(n, dtype=np.int64)])
        cols = np.concatenate([v, u, np.arange(n, dtype=np.int64)])
    else:
        rows = np.concatenate([u, np.arange(n, dtype=np.int64)])
        cols = np.concatenate([v, np.arange(n, dtype=np.int64)])

    adj = sp.coo_matrix(
        (np.ones(rows.shape[0], dtype=np.float64), (rows, cols)), shape=(n, n)
    ).tocsr()
    adj.data[:] = 1.0  # collapse duplicates to unweighted entries
    adj.sort_indices()

    if not symmetrize:
        if (adj != adj.T).nnz != 0:
            raise DataError("edge list is not symmetric and symmetrize=False")

    degrees_tilde = np.diff(adj.indptr).astype(np.int64)

    num_comp, labels = _connected_components(adj, directed=False, return_labels=True)
    labels = labels.astype(np.int64)
    sizes = np.bincount(labels, minlength=num_comp).astype(np.int64)
    upper = sp.triu(adj, k=1).tocoo()
    edge_counts = np.bincount(labels[upper.row], minlength=num_comp).astype(np.int64)

    for arr in (adj.data, adj.indices, adj.indptr):
        arr.flags.writeable = False
    return Graph(
        adjacency=adj,
        degrees_tilde=_freeze(degrees_tilde),
        component_id=_freeze(labels),
        component_sizes=_freeze(sizes),
        component_edge_counts=_freeze(edge_counts),
    )


def load_graph(source: str | IO[str], symmetrize: bool = True,
               node_count: int | None = None) -> Graph:
    """Load a :class:`Graph` from an edge-list file or file-like object."""
    return build_graph(read_edge_list(source), node_count=node_count,
                       symmetrize=symmetrize)


def connected_components(graph: Graph) -> np.ndarray:
    """Per-node component labels (computed once at construction)."""
    return graph.component_id
