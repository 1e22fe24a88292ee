"""Synthetic graph/dataset generators and local-dataset conversion.

Nothing here downloads anything: generators build graphs in memory and
``convert_planetoid`` repacks a locally available copy of the classic
citation-network distribution (the ``ind.<name>.*`` pickle files) into
this package's plain-text interchange formats.
"""

from __future__ import annotations

import pickle
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io as ndls_io
from .errors import DataError
from .graph import Graph, build_graph
from .model import SplitMasks


def erdos_renyi_graph(n: int, p: float, seed: int = 0,
                      connect: bool = True) -> Graph:
    """Uniform random graph; with ``connect`` a random spanning tree is
    unioned in so the result is connected."""
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n, k=1)
    mask = rng.random(len(rows)) < p
    edges = np.column_stack([rows[mask], cols[mask]])
    if connect and n > 1:
        edges = np.vstack([edges, _random_spanning_tree(n, rng)])
    return build_graph(edges, node_count=n)


def _random_spanning_tree(n: int, rng: np.random.Generator) -> np.ndarray:
    order = rng.permutation(n)
    parents = np.array([order[rng.integers(0, i)] for i in range(1, n)])
    return np.column_stack([order[1:], parents])


def preferential_attachment_graph(n: int, m_attach: int = 2,
                                  seed: int = 0) -> Graph:
    """Power-law random graph grown by preferential attachment."""
    if n <= m_attach:
        raise DataError(f"need n > m_attach, got n={n}, m_attach={m_attach}")
    rng = np.random.default_rng(seed)
    edges = []
    endpoints = []  # node appears once per incident edge: degree-biased pool
    for u, v in ((i, j) for i in range(m_attach + 1) for j in range(i)):
        edges.append((u, v))
        endpoints += [u, v]
    for node in range(m_attach + 1, n):
        targets = set()
        while len(targets) < m_attach:
            targets.add(endpoints[rng.integers(0, len(endpoints))])
        for t in targets:
            edges.append((node, t))
            endpoints += [node, t]
    return build_graph(np.asarray(edges, dtype=np.int64), node_count=n)


def random_sparse_graph(n: int, m: int, seed: int = 0) -> Graph:
    """Uniform random edges, not necessarily connected; for scale tests."""
    rng = np.random.default_rng(seed)
    u = rng.integers(0, n, size=m, dtype=np.int64)
    v = rng.integers(0, n, size=m, dtype=np.int64)
    keep = u != v
    return build_graph(np.column_stack([u[keep], v[keep]]), node_count=n)


@dataclass
class Dataset:
    """In-memory dataset: graph, features, labels, and split masks."""

    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    splits: SplitMasks


def planted_partition_dataset(n: int = 300, classes: int = 3,
                              p_in: float = 0.06, p_out: float = 0.002,
                              feature_dim: int = 16, separation: float = 1.0,
                              noise: float = 2.0, train_per_class: int = 5,
                              val_per_class: int = 30,
                              seed: int = 0) -> Dataset:
    """Block-structured random graph with noisy Gaussian class features.

    Features alone are weakly informative (high ``noise``); intra-class
    edges dominate, so neighborhood smoothing recovers the signal.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(classes), int(np.ceil(n / classes)))[:n]
    rng.shuffle(labels)

    rows, cols = np.triu_indices(n, k=1)
    same = labels[rows] == labels[cols]
    prob = np.where(same, p_in, p_out)
    mask = rng.random(len(rows)) < prob
    edges = np.column_stack([rows[mask], cols[mask]])
    graph = build_graph(edges, node_count=n)

    centers = rng.standard_normal((classes, feature_dim)) * separation
    features = centers[labels] + noise * rng.standard_normal((n, feature_dim))

    train, val = [], []
    for c in range(classes):
        ids = rng.permutation(np.flatnonzero(labels == c))
        train.append(ids[:train_per_class])
        val.append(ids[train_per_class:train_per_class + val_per_class])
    train = np.sort(np.concatenate(train))
    val = np.sort(np.concatenate(val))
    test = np.setdiff1d(np.arange(n), np.concatenate([train, val]))
    return Dataset(graph=graph, features=features.astype(np.float32),
                   labels=labels.astype(np.int64),
                   splits=SplitMasks(train=train, val=val, test=test))


def write_dataset(dataset: Dataset, out_dir: str | Path,
                  feature_format: str = "binary") -> dict:
    """Write a dataset in the interchange formats; returns the file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    edges_path = out / "edges.txt"
    with open(edges_path, "w", encoding="utf-8") as handle:
        for u, v in dataset.graph.undirected_edges():
            handle.write(f"{u}\t{v}\n")
    suffix = "csv" if feature_format == "csv" else "bin"
    features_path = out / f"features.{suffix}"
    ndls_io.save_matrix(features_path, dataset.features, fmt=feature_format)
    labels_path = out / "labels.txt"
    ndls_io.save_labels(labels_path, dataset.labels)
    splits_dir = out / "splits"
    splits_dir.mkdir(exist_ok=True)
    paths = {
        "edges": str(edges_path),
        "features": str(features_path),
        "labels": str(labels_path),
        "splits": {
            "train": str(splits_dir / "train.txt"),
            "val": str(splits_dir / "val.txt"),
            "test": str(splits_dir / "test.txt"),
        },
    }
    ndls_io.save_splits(dataset.splits, paths["splits"]["train"],
                        paths["splits"]["val"], paths["splits"]["test"])
    return paths


def karate_club_graph() -> Graph:
    """Zachary's karate club network (34 nodes); needs networkx."""
    try:
        import networkx as nx
    except ImportError as exc:  # pragma: no cover
        raise ImportError("karate_club_graph requires networkx") from exc
    g = nx.karate_club_graph()
    edges = np.asarray(list(g.edges()), dtype=np.int64)
    return build_graph(edges, node_count=g.number_of_nodes())


# ---------------------------------------------------------------------------
# citation-network conversion
# ---------------------------------------------------------------------------

_PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def _load_pickle(path: Path):
    with open(path, "rb") as handle:
        if sys.version_info > (3, 0):
            return pickle.load(handle, encoding="latin1")
        return pickle.load(handle)  # pragma: no cover


def convert_planetoid(raw_dir: str | Path, name: str,
                      out_dir: str | Path) -> dict:
    """Repack ``ind.<name>.*`` files into the interchange formats.

    Expects the classic distribution: pickled sparse feature blocks
    (labeled train, test, and the remaining pool), one-hot label arrays,
    an adjacency dict, and a text file of test ids.  Test rows arrive
    permuted and are put back in index order; gaps in the testid range
    (present in one of the citation networks) become zero-feature,
    unlabeled nodes.  Splits follow the standard protocol: the labeled
    block is the train set, the next 500 nodes the validation set, and
    the listed test ids the test set.
    """
    raw = Path(raw_dir)
    parts = {}
    for part in _PLANETOID_PARTS:
        path = raw / f"ind.{name}.{part}"
        if not path.exists():
            raise DataError(f"missing planetoid file {path}")
        parts[part] = _load_pickle(path)
    index_path = raw / f"ind.{name}.test.index"
    if not index_path.exists():
        raise DataError(f"missing planetoid file {index_path}")
    test_idx = ndls_io.load_node_ids(index_path)

    x, tx, allx = parts["x"], parts["tx"], parts["allx"]
    y, ty, ally = (np.asarray(parts[k]) for k in ("y", "ty", "ally"))

    lo, hi = int(test_idx.min()), int(test_idx.max())
    full_range = np.arange(lo, hi + 1)
    if len(full_range) != tx.shape[0]:
        # isolated test nodes: widen the test block with zero rows; the
        # stored rows sit at the sorted id positions before the reorder
        tx_full = sp.lil_matrix((len(full_range), x.shape[1]))
        tx_full[np.sort(test_idx) - lo] = tx
        tx = tx_full.tocsr()
        ty_full = np.zeros((len(full_range), y.shape[1]))
        ty_full[np.sort(test_idx) - lo] = ty
        ty = ty_full

    features = sp.vstack([allx, tx]).toarray().astype(np.float32)
    onehot = np.vstack([ally, ty])
    # test rows are stored in the permuted order listed in test.index
    features[test_idx] = features[np.sort(test_idx)]
    onehot[test_idx] = onehot[np.sort(test_idx)]

    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)
    n = features.shape[0]

    edges = []
    for node, neighbors in parts["graph"].items():
        for other in neighbors:
            if node < n and other < n:
                edges.append((node, other))
    graph = build_graph(np.asarray(edges, dtype=np.int64), node_count=n)

    train = np.arange(y.shape[0])
    val = np.arange(y.shape[0], min(y.shape[0] + 500, n))
    splits = SplitMasks(train=train, val=val, test=np.sort(test_idx))
    dataset = Dataset(graph=graph, features=features,
                      labels=labels.astype(np.int64), splits=splits)
    return write_dataset(dataset, out_dir)
