"""Per-node local smoothing iterations.

The local smoothing iteration of node i at threshold ``epsilon`` is the
smallest k such that row i of the k-th operator power is within
``epsilon`` (two-norm) of its stationary limit.  Nodes in dense regions
reach the limit quickly and get small values; peripheral nodes get large
ones.  Two estimators are provided: an exact one that advances dense
one-hot batches through the transposed operator, and a Gaussian-sketch one
whose memory is O(n * probes) and therefore scales to very large graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.stats import spearmanr

from .errors import ConfigError, DataError
from .graph import Graph
from .propagation import (
    PropagationOperator,
    stationary_apply,
    stationary_columns,
    stationary_model,
)

EXACT_NODE_LIMIT = 20_000
LOW_CONFIDENCE_PROBES = 16


@dataclass(frozen=True)
class InfluenceRow:
    """Dense influence of all nodes on ``node`` after ``k`` steps."""

    node: int
    k: int
    vector: np.ndarray


@dataclass(frozen=True)
class LsiVector:
    """Per-node smoothing iterations for one threshold.

    ``capped_nodes`` lists nodes that never crossed the threshold within
    ``k_max``; their value is ``k_max``.  ``method`` is "exact" or
    "sketch"; sketch results with very few probes are flagged
    ``low_confidence``.
    """

    values: np.ndarray
    epsilon: float
    k_max: int
    method: str
    capped_nodes: np.ndarray
    r: float
    probes: int | None = None
    low_confidence: bool = False

    def __len__(self) -> int:
        return len(self.values)

    @property
    def max_k(self) -> int:
        return int(self.values.max()) if len(self.values) else 0


def influence_row(operator: PropagationOperator, i: int, k: int) -> InfluenceRow:
    """Row i of the k-th operator power, via k transpose-operator steps."""
    n = operator.graph.n
    i = int(i)
    if not 0 <= i < n:
        raise DataError(f"node id {i} out of bounds for n={n}")
    if k < 0:
        raise ConfigError(f"iteration count k must be >= 0, got {k}")
    vec = np.zeros(n, dtype=np.float64)
    vec[i] = 1.0
    transpose = operator.transpose_matrix
    for _ in range(int(k)):
        vec = transpose @ vec
    return InfluenceRow(node=i, k=int(k), vector=vec)


def _validate_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not epsilon > 0.0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    return epsilon


def compute_lsi_grid(operator: PropagationOperator, epsilons, k_max: int = 200,
                     batch_size: int = 256) -> dict[float, LsiVector]:
    """Exact smoothing iterations for several thresholds in one pass.

    All thresholds share the propagation work: per node batch the dense
    rows of successive operator powers are advanced once and every
    threshold records its own first crossing.
    """
    eps = sorted({_validate_epsilon(e) for e in epsilons})
    if not eps:
        raise ConfigError("epsilon grid must be non-empty")
    if k_max < 0:
        raise ConfigError(f"k_max must be >= 0, got {k_max}")
    n = operator.graph.n
    model = stationary_model(operator)
    transpose = operator.transpose_matrix

    k_values = np.full((len(eps), n), -1, dtype=np.int64)

    for start in range(0, n, batch_size):
        nodes = np.arange(start, min(start + batch_size, n))
        width = len(nodes)
        cols = np.zeros((n, width), dtype=np.float64)
        cols[nodes, np.arange(width)] = 1.0
        stat = stationary_columns(model, nodes)
        live_nodes = nodes

        k = 0
        while True:
            dist = np.linalg.norm(cols - stat, axis=0)
            for e_idx, threshold in enumerate(eps):
                crossed = (dist < threshold) & (k_values[e_idx, live_nodes] < 0)
                if crossed.any():
                    k_values[e_idx, live_nodes[crossed]] = k
            # a node is finished once the smallest threshold has crossed
            active = k_values[0, live_nodes] < 0
            if not active.any() or k == k_max:
                break
            if active.sum() <= len(live_nodes) // 2:
                cols = cols[:, active]
                stat = stat[:, active]
                live_nodes = live_nodes[active]
            cols = transpose @ cols
            k += 1

    out = {}
    for e_idx, threshold in enumerate(eps):
        vals = k_values[e_idx]
        capped = np.flatnonzero(vals < 0)
        vals = vals.copy()
        vals[capped] = k_max
        vals.flags.writeable = False
        out[threshold] = LsiVector(
            values=vals, epsilon=threshold, k_max=int(k_max), method="exact",
            capped_nodes=capped, r=operator.r,
        )
    return out


def compute_lsi_exact(operator: PropagationOperator, epsilon: float,
                      k_max: int = 200, batch_size: int = 256) -> LsiVector:
    """Exact per-node smoothing iterations (dense row per node, batched)."""
    epsilon = _validate_epsilon(epsilon)
    return compute_lsi_grid(operator, [epsilon], k_max=k_max,
                            batch_size=batch_size)[epsilon]


def compute_lsi_sketch(operator: PropagationOperator, epsilon: float,
                       k_max: int = 200, probes: int = 256,
                       seed: int = 0) -> LsiVector:
    """Sketched smoothing iterations for all nodes simultaneously.

    An (n, probes) Gaussian probe matrix with entries N(0, 1/probes) is
    advanced through the operator; subtracting the closed-form stationary
    sketch (rank-1 per component) leaves a residual whose squared row
    norms are unbiased estimates of the squared distances.  Memory
    O(n*probes), time O(k_max * m * probes).
    """
    epsilon = _validate_epsilon(epsilon)
    probes = int(probes)
    if probes < 1:
        raise ConfigError(f"probes must be >= 1, got {probes}")
    if k_max < 0:
        raise ConfigError(f"k_max must be >= 0, got {k_max}")

    n = operator.graph.n
    rng = np.random.default_rng(seed)
    sketch = rng.standard_normal((n, probes)) / math.sqrt(probes)
    target = stationary_apply(stationary_model(operator), sketch)
    matrix = operator.matrix

    values = np.full(n, -1, dtype=np.int64)
    residual = np.empty_like(sketch)
    k = 0
    while True:
        np.subtract(target, sketch, out=residual)
        estimate = np.sqrt(np.einsum("ij,ij->i", residual, residual))
        pending = values < 0
        crossed = pending & (estimate < epsilon)
        values[crossed] = k
        if not (values < 0).any() or k == k_max:
            break
        sketch = matrix @ sketch
        k += 1

    capped = np.flatnonzero(values < 0)
    values[capped] = k_max
    values.flags.writeable = False
    return LsiVector(
        values=values, epsilon=epsilon, k_max=int(k_max), method="sketch",
        capped_nodes=capped, r=operator.r, probes=probes,
        low_confidence=probes < LOW_CONFIDENCE_PROBES,
    )


def compute_lsi(operator: PropagationOperator, epsilon: float, k_max: int = 200,
                probes: int = 256, seed: int = 0) -> LsiVector:
    """Exact estimator up to 20k nodes, sketch beyond."""
    if operator.graph.n <= EXACT_NODE_LIMIT:
        return compute_lsi_exact(operator, epsilon, k_max=k_max)
    return compute_lsi_sketch(operator, epsilon, k_max=k_max, probes=probes,
                              seed=seed)


# ---------------------------------------------------------------------------
# upper bounds
# ---------------------------------------------------------------------------


def spectral_upper_bounds(graph: Graph, lambda2: float,
                          epsilon: float) -> np.ndarray:
    """Per-node spectral upper bound on the smoothing iteration.

    The bound is log base ``lambda2`` of epsilon * sqrt(d̃_i / (2m+n)),
    with 2m+n taken per connected component.  NaN marks nodes where the
    bound is not applicable (rate outside (0, 1) or argument >= 1); a rate
    of exactly 0 makes the distance vanish after one step, so the bound is
    reported as 1.
    """
    epsilon = _validate_epsilon(epsilon)
    denom = graph.component_denominators()[graph.component_id]
    arg = epsilon * np.sqrt(graph.degrees_tilde / denom)
    out = np.full(graph.n, np.nan, dtype=np.float64)
    if lambda2 == 0.0:
        out[:] = 1.0
        return out
    if not 0.0 < lambda2 < 1.0:
        return out
    applicable = arg < 1.0
    out[applicable] = np.log(arg[applicable]) / math.log(lambda2)
    return out


def spectral_upper_bound(graph: Graph, lambda2: float, epsilon: float,
                         i: int) -> float:
    """Scalar version of :func:`spectral_upper_bounds` for one node."""
    i = int(i)
    if not 0 <= i < graph.n:
        raise DataError(f"node id {i} out of bounds for n={graph.n}")
    return float(spectral_upper_bounds(graph, lambda2, epsilon)[i])


@dataclass(frozen=True)
class BoundReport:
    """Validation of the two upper bounds and their combination."""

    spectral_bounds: np.ndarray    # real-valued, NaN where not applicable
    neighbor_bounds: np.ndarray    # max neighbor value + 1, NaN for isolated nodes
    union_bounds: np.ndarray       # min(neighbor, ceil(spectral)), NaN-aware
    violations: list = field(default_factory=list)
    lambda2: float = math.nan
    lambda_min: float = math.nan
    rate: float = math.nan
    epsilon: float = math.nan

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bounds(lsi: LsiVector, graph: Graph, lambda2: float, epsilon: float,
                 lambda_min: float | None = None) -> BoundReport:
    """Verify both upper bounds for every node of an exact r=0 result.

    The convergence rate used for the spectral bound is
    ``max(lambda2, |lambda_min|)`` when the smallest eigenvalue is
    supplied, since negative eigenvalues slow mixing just as positive
    ones do; both values are recorded in the report.
    """
    if lsi.method != "exact":
        raise ConfigError("bound checks require an exact result")
    if lsi.r != 0.0:
        raise ConfigError(f"bound checks require r=0, got r={lsi.r}")
    if len(lsi.capped_nodes):
        raise ConfigError(
            f"bound check refused: {len(lsi.capped_nodes)} nodes hit the "
            f"k_max cap and their values are lower bounds only"
        )
    if len(lsi) != graph.n:
        raise DataError("result and graph sizes differ")

    rate = lambda2 if lambda_min is None else max(lambda2, abs(lambda_min))
    spectral = spectral_upper_bounds(graph, rate, epsilon)

    k = lsi.values.astype(np.float64)
    adj = sp.triu(graph.adjacency, k=1).tocoo()
    neighbor = np.full(graph.n, -np.inf)
    np.maximum.at(neighbor, adj.row, k[adj.col])
    np.maximum.at(neighbor, adj.col, k[adj.row])
    isolated = ~np.isfinite(neighbor)
    neighbor += 1.0
    neighbor[isolated] = np.nan

    union = np.fmin(neighbor, np.ceil(spectral))

    violations = []
    for name, bound in (("spectral", np.ceil(spectral)),
                        ("neighbor", neighbor),
                        ("union", union)):
        mask = np.isfinite(bound) & (k > bound)
        for node in np.flatnonzero(mask):
            violations.append({
                "node": int(node),
                "bound": name,
                "k": int(lsi.values[node]),
                "limit": float(bound[node]),
            })

    return BoundReport(
        spectral_bounds=spectral,
        neighbor_bounds=neighbor,
        union_bounds=union,
        violations=violations,
        lambda2=float(lambda2),
        lambda_min=math.nan if lambda_min is None else float(lambda_min),
        rate=float(rate),
        epsilon=float(epsilon),
    )


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LsiStats:
    """Distribution summaries of a smoothing-iteration vector."""

    cdf: np.ndarray             # (k, fraction of nodes with value <= k)
    degree_buckets: np.ndarray  # (d̃, mean value, node count)
    spearman: float
    epsilon: float
    method: str

    def to_dict(self) -> dict:
        return {
            "cdf": [[int(k), float(f)] for k, f in self.cdf],
            "degree_buckets": [
                [int(d), float(mk), int(c)] for d, mk, c in self.degree_buckets
            ],
            "spearman": float(self.spearman),
            "epsilon": float(self.epsilon),
            "method": self.method,
        }


def lsi_statistics(lsi: LsiVector, graph: Graph) -> LsiStats:
    """CDF, per-degree means, and degree rank correlation of the values."""
    if len(lsi) != graph.n:
        raise DataError("result and graph sizes differ")
    values = lsi.values
    n = graph.n

    max_k = int(values.max()) if n else 0
    counts = np.bincount(values, minlength=max_k + 1)
    cdf = np.column_stack([
        np.arange(max_k + 1, dtype=np.float64),
        np.cumsum(counts) / max(n, 1),
    ])

    dt = graph.degrees_tilde
    uniq = np.unique(dt)
    means = np.array([values[dt == d].mean() for d in uniq])
    cnts = np.array([(dt == d).sum() for d in uniq])
    buckets = np.column_stack([uniq.astype(np.float64), means,
                               cnts.astype(np.float64)])

    if len(np.unique(values)) < 2 or len(uniq) < 2:
        rho = 0.0  # rank correlation undefined for constant input
    else:
        rho = float(spearmanr(dt, values).statistic)
        if math.isnan(rho):
            rho = 0.0
    return LsiStats(cdf=cdf, degree_buckets=buckets, spearman=rho,
                    epsilon=lsi.epsilon, method=lsi.method)
