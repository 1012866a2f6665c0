"""How the classical coarse-graining bound is assembled.

A d-state classical model of a process with more causal states must merge
some of them. For each way of merging (a set partition of the states into at
most d blocks), every block predicts with a single K-symbol distribution, and
the best such distribution is the stationary mixture of the merged states'
own predictions. The bound is the cheapest partition.

Run: python demos/bound_walkthrough.py
"""

from __future__ import annotations

import numpy as np

from qpredict import classical_lower_bound, optimal_merged_morph, stationary_distribution, uniform_renewal
from qpredict.bound import count_partitions
from qpredict.process import state_morphs

N, d = 4, 2
machine = uniform_renewal(N)
pi = stationary_distribution(machine)
print(f"uniform renewal N={N}: stationary distribution {np.round(pi, 4)}")

morphs = state_morphs(machine, 1)
for s, name in enumerate(machine.state_names):
    print(f"  state {name}: P(next = 0, 1) = {np.round(morphs[s], 4)}")

print(f"\npartitions of {N} states into <= {d} blocks: {count_partitions(N, d)}")
report = classical_lower_bound(machine, d, K=N)
for partition, value in sorted(report.per_partition, key=lambda t: t[1]):
    blocks = " | ".join(",".join(str(s) for s in b) for b in partition.blocks)
    print(f"  {blocks:<12} {value:.5f}")

print(f"\nbound at d={d}, K={N}: {report.bound:.5f} via {report.best.partition.blocks}")

# The merged prediction for the winning partition's largest block
block = max(report.best.partition.blocks, key=len)
morph, contribution = optimal_merged_morph(machine, block, N)
print(f"block {block}: contribution {contribution:.5f}, merged next-symbol law {np.round(morph.reshape(2, -1).sum(1), 4)}")

print("\nbound by dimension:")
for dim in range(1, N + 1):
    print(f"  d={dim}: {classical_lower_bound(machine, dim, K=N).bound:.5f}")
