#!/usr/bin/env python3
"""How operator powers approach the closed-form stationary limit.

The limit of the normalized adjacency powers has a closed form driven
only by degrees, so it never needs to be iterated to.  This script
verifies the closed form against a long power iteration and shows the
geometric decay rate set by the second eigenvalue.
"""

import numpy as np

from ndls import (
    build_operator,
    extreme_eigenvalues,
    stationary_matrix,
    stationary_model,
)
from ndls.datasets import erdos_renyi_graph

graph = erdos_renyi_graph(80, 0.06, seed=4)
operator = build_operator(graph, r=0.0)
dense = operator.matrix.toarray()
limit = stationary_matrix(stationary_model(operator))

lam2, lam_min = extreme_eigenvalues(operator)
rate = max(lam2, abs(lam_min))
print(f"graph: n={graph.n}, m={graph.m}")
print(f"second eigenvalue {lam2:.4f}, smallest {lam_min:.4f}, "
      f"mixing rate {rate:.4f}")
print()

print("closed form vs the 5000th power:")
power = np.linalg.matrix_power(dense, 5000)
print(f"  max entry difference = {np.abs(power - limit).max():.2e}")
print()

print("Frobenius distance to the limit per step (geometric decay):")
distances = []
power = np.eye(graph.n)
for k in range(25):
    distances.append(np.linalg.norm(power - limit))
    power = dense @ power
for k in (0, 1, 2, 4, 8, 16, 24):
    ratio = distances[k] / (rate ** k * distances[0])
    print(f"  k={k:2d}: distance {distances[k]:9.2e}   "
          f"/ (rate^k * d0) = {ratio:.3f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    out = Path(__file__).parent / "output"
    out.mkdir(exist_ok=True)
    ks = np.arange(len(distances))
    plt.figure(figsize=(5, 3.5))
    plt.semilogy(ks, distances, "o-", label="measured")
    plt.semilogy(ks, distances[0] * rate ** ks, "--",
                 label=f"rate^k, rate={rate:.3f}")
    plt.xlabel("k")
    plt.ylabel("Frobenius distance to limit")
    plt.legend()
    plt.tight_layout()
    plt.savefig(out / "stationary_convergence.png", dpi=120)
    print(f"\nplot written to {out / 'stationary_convergence.png'}")
except ImportError:
    print("\n(matplotlib not installed; skipping the plot)")
