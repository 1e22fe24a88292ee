"""Node-dependent and fixed-iteration smoothing kernels.

The node-dependent kernel averages the propagation states of each node up
to its own iteration count: row i of the output is the mean of row i of
X, AX, ..., A^{K_i} X.  The same arithmetic applies to feature matrices
and to soft-label matrices, so both entry points share one code path.
Fixed-iteration baselines (plain k-th power, and the uniform average of
all powers up to k) are provided for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .lsi import LsiVector
from .propagation import PropagationOperator, propagate


@dataclass(frozen=True)
class SmoothedMatrix:
    """Dense smoothed matrix plus a record of how it was produced."""

    values: np.ndarray
    provenance: dict

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class MWeights:
    """Per-iteration diagonal weights of the node-dependent average.

    ``weights[k, i]`` is 1/(K_i + 1) while k <= K_i and 0 afterwards, so
    each node's weights across iterations sum to one.
    """

    weights: np.ndarray  # shape (max_k + 1, n)

    @property
    def max_k(self) -> int:
        return self.weights.shape[0] - 1


def _check_rows(operator: PropagationOperator, matrix: np.ndarray) -> np.ndarray:
    x = np.asarray(matrix)
    if x.shape[0] != operator.graph.n:
        raise DataError(
            f"matrix has {x.shape[0]} rows but the graph has {operator.graph.n} nodes"
        )
    return x.astype(np.float64, copy=False)


def _check_lsi(operator: PropagationOperator, lsi: LsiVector) -> np.ndarray:
    if len(lsi) != operator.graph.n:
        raise DataError(
            f"iteration vector covers {len(lsi)} nodes but the graph has "
            f"{operator.graph.n}"
        )
    return lsi.values


def _truncated_average(operator: PropagationOperator, x: np.ndarray,
                       k_values: np.ndarray) -> np.ndarray:
    """Streaming multi-scale average: one live state and one running sum.

    Node i stops accumulating after step K_i; row i of the result is
    therefore bit-for-bit independent of every other node's count.
    """
    acc = x.copy()
    current = x
    max_k = int(k_values.max()) if len(k_values) else 0
    for k in range(1, max_k + 1):
        current = operator.matrix @ current
        mask = k_values >= k
        acc[mask] += current[mask]
    denom = (k_values + 1).astype(np.float64)
    return acc / (denom[:, None] if acc.ndim == 2 else denom)


def ndls_smooth(operator: PropagationOperator, matrix: np.ndarray,
                lsi: LsiVector) -> SmoothedMatrix:
    """Node-dependent smoothing of a feature matrix."""
    x = _check_rows(operator, matrix)
    k_values = _check_lsi(operator, lsi)
    out = _truncated_average(operator, x, k_values)
    return SmoothedMatrix(values=out, provenance={
        "kernel": "ndls", "r": operator.r, "epsilon": lsi.epsilon,
        "k_max": lsi.k_max, "lsi_method": lsi.method,
    })


def ndls_smooth_labels(operator: PropagationOperator, soft_labels: np.ndarray,
                       lsi: LsiVector, tol: float = 1e-4) -> SmoothedMatrix:
    """Node-dependent smoothing of soft labels.

    Input rows must be probability vectors (non-negative, summing to one
    within ``tol``).  The smoothing itself is the identical code path used
    for features; no renormalization is applied afterwards.
    """
    y = _check_rows(operator, soft_labels)
    if y.ndim != 2:
        raise DataError("soft labels must be a 2-d matrix")
    sums = y.sum(axis=1)
    bad = np.flatnonzero((y < 0).any(axis=1) | (np.abs(sums - 1.0) > tol))
    if len(bad):
        shown = ", ".join(str(int(b)) for b in bad[:10])
        more = "" if len(bad) <= 10 else f" (+{len(bad) - 10} more)"
        raise DataError(f"rows are not probability vectors at nodes {shown}{more}")
    k_values = _check_lsi(operator, lsi)
    out = _truncated_average(operator, y, k_values)
    return SmoothedMatrix(values=out, provenance={
        "kernel": "ndls-label", "r": operator.r, "epsilon": lsi.epsilon,
        "k_max": lsi.k_max, "lsi_method": lsi.method,
    })


def build_m_weights(lsi: LsiVector) -> MWeights:
    """Diagonal weight stack equivalent to the node-dependent average."""
    k_values = lsi.values
    max_k = int(k_values.max()) if len(k_values) else 0
    ks = np.arange(max_k + 1)[:, None]
    weights = np.where(ks <= k_values[None, :],
                       1.0 / (k_values[None, :] + 1.0), 0.0)
    return MWeights(weights=weights)


def apply_m_weights(operator: PropagationOperator, matrix: np.ndarray,
                    m_weights: MWeights) -> np.ndarray:
    """Reference recomputation: sum of diagonal-weighted operator powers.

    Materializes each power separately; used to cross-check the streaming
    kernel, not for production smoothing.
    """
    x = _check_rows(operator, matrix)
    out = np.zeros_like(x)
    current = x
    for k in range(m_weights.max_k + 1):
        if k > 0:
            current = propagate(operator, current)
        w = m_weights.weights[k]
        out += current * (w[:, None] if x.ndim == 2 else w)
    return out


def sgc_smooth(operator: PropagationOperator, matrix: np.ndarray,
               k: int) -> SmoothedMatrix:
    """Fixed-iteration smoothing: the k-th operator power applied once."""
    if k < 0:
        raise DataError(f"iteration count k must be >= 0, got {k}")
    x = _check_rows(operator, matrix)
    for _ in range(int(k)):
        x = operator.matrix @ x
    return SmoothedMatrix(values=x.copy() if k == 0 else x, provenance={
        "kernel": "sgc", "r": operator.r, "k": int(k),
    })


def s2gc_smooth(operator: PropagationOperator, matrix: np.ndarray,
                k: int) -> SmoothedMatrix:
    """Uniform average of the operator powers 0..k."""
    if k < 0:
        raise DataError(f"iteration count k must be >= 0, got {k}")
    x = _check_rows(operator, matrix)
    acc = x.copy()
    current = x
    for _ in range(int(k)):
        current = operator.matrix @ current
        acc += current
    return SmoothedMatrix(values=acc / (k + 1.0), provenance={
        "kernel": "s2gc", "r": operator.r, "k": int(k),
    })
