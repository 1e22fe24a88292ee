"""Normalized propagation operators and their stationary limits.

The operator realized here is ``D̃^(r-1) Ã D̃^(-r)`` for a convolution
coefficient ``r`` in [0, 1]: ``r = 0`` gives the row-stochastic transition
matrix, ``r = 1`` its column-stochastic transpose, and ``r = 0.5`` the
symmetric normalization.  Because self-loops are always present the power
sequence of the operator converges, and its limit has the closed form

    limit[i, j] = d̃_i^r * d̃_j^(1-r) / (2*m_g + n_g)

for nodes i, j in the same connected component g (zero across components).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConfigError, DataError, NumericalError
from .graph import Graph

_POWER_SEED = 0x5EED


@dataclass(frozen=True)
class PropagationOperator:
    """Weighted CSR realization of the normalized adjacency.

    Immutable after construction; safe for concurrent reads.
    """

    graph: Graph
    r: float
    matrix: sp.csr_matrix

    @property
    def values(self) -> np.ndarray:
        """Edge weights aligned with the graph's col_indices."""
        return self.matrix.data

    @cached_property
    def transpose_matrix(self) -> sp.csr_matrix:
        """CSR transpose, cached: advancing one-hot vectors through it
        yields rows of operator powers."""
        t = self.matrix.T.tocsr()
        for arr in (t.data, t.indices, t.indptr):
            arr.flags.writeable = False
        return t


def build_operator(graph: Graph, r: float) -> PropagationOperator:
    """Build the normalized operator ``D̃^(r-1) Ã D̃^(-r)``."""
    r = float(r)
    if not 0.0 <= r <= 1.0:
        raise ConfigError(f"convolution coefficient r must be in [0, 1], got {r}")
    adj = graph.adjacency
    dt = graph.degrees_tilde.astype(np.float64)
    rows = np.repeat(np.arange(graph.n), np.diff(adj.indptr))
    values = dt[rows] ** (r - 1.0) * dt[adj.indices] ** (-r)
    matrix = sp.csr_matrix((values, adj.indices, adj.indptr), shape=adj.shape)
    for arr in (matrix.data, matrix.indices, matrix.indptr):
        arr.flags.writeable = False
    return PropagationOperator(graph=graph, r=r, matrix=matrix)


def propagate(operator: PropagationOperator, matrix: np.ndarray) -> np.ndarray:
    """One propagation step: the exact sparse-dense product.

    Accepts an (n,) vector or (n, f) matrix; accumulates in float64 and
    leaves the input unmodified.
    """
    x = np.asarray(matrix)
    if x.shape[0] != operator.graph.n:
        raise DataError(
            f"matrix has {x.shape[0]} rows but the graph has {operator.graph.n} nodes"
        )
    return operator.matrix @ x.astype(np.float64, copy=False)


@dataclass(frozen=True)
class StationaryModel:
    """Closed-form limit of operator powers, component-restricted."""

    r: float
    left: np.ndarray          # d̃_i^r
    right: np.ndarray         # d̃_j^(1-r)
    denominators: np.ndarray  # per-component 2*m_g + n_g
    component_id: np.ndarray

    @property
    def n(self) -> int:
        return len(self.left)


def stationary_model(operator: PropagationOperator) -> StationaryModel:
    graph = operator.graph
    dt = graph.degrees_tilde.astype(np.float64)
    left = dt ** operator.r
    right = dt ** (1.0 - operator.r)
    left.flags.writeable = False
    right.flags.writeable = False
    return StationaryModel(
        r=operator.r,
        left=left,
        right=right,
        denominators=graph.component_denominators(),
        component_id=graph.component_id,
    )


def stationary_row(model: StationaryModel, i: int) -> np.ndarray:
    """Dense row i of the stationary limit."""
    i = int(i)
    if not 0 <= i < model.n:
        raise DataError(f"node id {i} out of bounds for n={model.n}")
    comp = model.component_id[i]
    row = np.zeros(model.n, dtype=np.float64)
    mask = model.component_id == comp
    row[mask] = model.left[i] * model.right[mask] / model.denominators[comp]
    return row


def stationary_matrix(model: StationaryModel) -> np.ndarray:
    """Dense n-by-n stationary limit (small graphs only)."""
    same = model.component_id[:, None] == model.component_id[None, :]
    out = np.outer(model.left / model.denominators[model.component_id], model.right)
    out[~same] = 0.0
    return out


def stationary_columns(model: StationaryModel, nodes: np.ndarray) -> np.ndarray:
    """Stationary rows for ``nodes``, laid out as columns of an (n, b) array."""
    nodes = np.asarray(nodes)
    comp_b = model.component_id[nodes]
    scale = model.left[nodes] / model.denominators[comp_b]
    out = model.right[:, None] * scale[None, :]
    if len(model.denominators) > 1:
        out *= model.component_id[:, None] == comp_b[None, :]
    return out


def stationary_apply(model: StationaryModel, matrix: np.ndarray) -> np.ndarray:
    """Product of the stationary limit with a dense (n, s) matrix.

    Rank-1 per component, so the cost is O(n*s) regardless of graph size.
    """
    z = np.asarray(matrix, dtype=np.float64)
    if z.shape[0] != model.n:
        raise DataError(f"matrix has {z.shape[0]} rows but the graph has {model.n} nodes")
    ncomp = len(model.denominators)
    if ncomp == 1:
        q = (model.right @ z) / model.denominators[0]
        return np.outer(model.left, q)
    indicator = sp.csr_matrix(
        (model.right, (model.component_id, np.arange(model.n))),
        shape=(ncomp, model.n),
    )
    q = indicator @ z / model.denominators[:, None]
    return model.left[:, None] * q[model.component_id]


# ---------------------------------------------------------------------------
# spectra of the r=0 operator
# ---------------------------------------------------------------------------


def _largest_component(graph: Graph) -> tuple[sp.csr_matrix, np.ndarray]:
    """Adjacency and degree vector restricted to the largest component."""
    if graph.num_components == 1:
        return graph.adjacency, graph.degrees_tilde.astype(np.float64)
    target = int(np.argmax(graph.component_sizes))
    nodes = np.flatnonzero(graph.component_id == target)
    sub = graph.adjacency[nodes][:, nodes].tocsr()
    return sub, np.diff(sub.indptr).astype(np.float64)


def _symmetric_normalized(adj: sp.csr_matrix, dt: np.ndarray) -> sp.csr_matrix:
    dinv = 1.0 / np.sqrt(dt)
    rows = np.repeat(np.arange(adj.shape[0]), np.diff(adj.indptr))
    data = adj.data * dinv[rows] * dinv[adj.indices]
    return sp.csr_matrix((data, adj.indices.copy(), adj.indptr.copy()), shape=adj.shape)


def _power_top(matvec, n: int, max_iter: int, tol: float) -> float:
    """Largest eigenvalue of a symmetric PSD operator given as a matvec."""
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    residual = np.inf
    for _ in range(max_iter):
        w = matvec(v)
        mu = float(v @ w)
        residual = float(np.linalg.norm(w - mu * v))
        if residual <= tol:
            return mu
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    raise NumericalError(
        f"power iteration did not converge within {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
    )


def extreme_eigenvalues(operator: PropagationOperator, method: str = "auto",
                        max_iter: int = 200_000,
                        tol: float = 1e-11) -> tuple[float, float]:
    """(second-largest, smallest) eigenvalue of the r=0 operator.

    Computed on the symmetric similar matrix D̃^(-1/2) Ã D̃^(-1/2), which
    shares the operator's spectrum.  Disconnected graphs are handled by
    restricting to the largest component.  ``method`` is "dense" (exact
    symmetric eigensolve), "power" (deflated power iteration), or "auto"
    (dense up to 2048 nodes).
    """
    if operator.r != 0.0:
        raise ConfigError(
            f"spectral routines require the r=0 operator, got r={operator.r}"
        )
    adj, dt = _largest_component(operator.graph)
    n = adj.shape[0]
    if n < 2:
        raise DataError("second eigenvalue undefined for a single-node component")
    sym = _symmetric_normalized(adj, dt)

    if method == "auto":
        method = "dense" if n <= 2048 else "power"
    if method == "dense":
        eigvals = scipy.linalg.eigh(sym.toarray(), eigvals_only=True)
        return float(eigvals[-2]), float(eigvals[0])
    if method != "power":
        raise ConfigError(f"unknown eigensolve method {method!r}")

    # Top eigenpair of sym is known exactly: eigenvalue 1, eigenvector
    # proportional to sqrt(d̃).  Shift the spectrum to [0, 1] so the power
    # method is monotone, and deflate the known pair.
    u = np.sqrt(dt)
    u /= np.linalg.norm(u)

    def shifted_deflated(v: np.ndarray) -> np.ndarray:
        w = 0.5 * (sym @ v + v)
        return w - (u @ w) * u

    lam2 = 2.0 * _power_top(shifted_deflated, n, max_iter, tol) - 1.0

    def shifted_negated(v: np.ndarray) -> np.ndarray:
        return 0.5 * (v - sym @ v)

    lam_min = 1.0 - 2.0 * _power_top(shifted_negated, n, max_iter, tol)
    return lam2, lam_min


def second_eigenvalue(operator: PropagationOperator, method: str = "auto",
                      max_iter: int = 200_000, tol: float = 1e-11) -> float:
    """Second-largest (signed) eigenvalue of the r=0 operator, in (-1, 1]."""
    return extreme_eigenvalues(operator, method=method, max_iter=max_iter, tol=tol)[0]
