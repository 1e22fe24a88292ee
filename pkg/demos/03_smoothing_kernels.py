#!/usr/bin/env python3
"""Node-dependent smoothing vs fixed-iteration kernels.

A fixed iteration count k treats every node alike: small k leaves
peripheral nodes noisy, large k over-smooths hubs toward the stationary
limit.  The node-dependent kernel averages each node's propagation states
only up to its own count.  This script compares the three kernels as
denoisers of a cluster-structured signal.
"""

import numpy as np

from ndls import (
    build_operator,
    compute_lsi_exact,
    ndls_smooth,
    s2gc_smooth,
    sgc_smooth,
)
from ndls.datasets import planted_partition_dataset

dataset = planted_partition_dataset(n=240, classes=2, p_in=0.10, p_out=0.004,
                                    feature_dim=1, separation=1.0, noise=1.5,
                                    seed=2)
graph = dataset.graph
operator = build_operator(graph, r=0.5)

# the clean signal is +-1 by block; observed features are a noisy version
clean = np.where(dataset.labels == 0, 1.0, -1.0)[:, None]
noisy = clean + 1.5 * np.random.default_rng(0).standard_normal((graph.n, 1))


def err(matrix):
    return float(np.sqrt(np.mean((matrix - clean) ** 2)))


print(f"two-block graph: n={graph.n}, m={graph.m}")
print(f"noisy signal rms error: {err(noisy):.3f}")
print()

print("fixed-iteration kernels:")
for k in (1, 2, 4, 8, 16, 32):
    plain = sgc_smooth(operator, noisy, k).values
    averaged = s2gc_smooth(operator, noisy, k).values
    print(f"  k={k:2d}: power-only {err(plain):.3f}   "
          f"uniform average {err(averaged):.3f}")

print()
print("node-dependent kernel:")
for epsilon in (0.2, 0.1, 0.05, 0.02):
    lsi = compute_lsi_exact(operator, epsilon, k_max=200)
    smoothed = ndls_smooth(operator, noisy, lsi)
    print(f"  epsilon={epsilon:<5}: counts {lsi.values.min()}..."
          f"{lsi.values.max()}  rms error {err(smoothed.values):.3f}")

print()
print("the node-dependent average tracks the best fixed k without tuning k,")
print("because each node stops right before its own over-smoothing point.")
