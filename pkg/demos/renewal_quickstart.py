"""Fit a qubit memory to uniform renewal data and compare it with classical models.

The uniform renewal process with N = 3 needs three classical memory states
for perfect prediction. Here a two-dimensional quantum memory is trained on
5000 sampled symbols, then scored against the exact process and against the
best any two-state classical coarse-graining can do.

Run: python demos/renewal_quickstart.py
"""

from __future__ import annotations

import numpy as np

from qpredict import TrainConfig, classical_lower_bound, distortion, encode_past, sample_sequence, train, uniform_renewal
from qpredict.quantum import bloch_coordinates, complete_unitary, conditional_next

machine = uniform_renewal(3)
print("causal states:", machine.state_names)
print("symbol-labeled transition matrices:\n", machine.labeled_matrices)

data = sample_sequence(machine, 5000, seed=0)
print(f"\nsampled {len(data)} symbols, tick rate {data.mean():.3f} (exact 2/(N+1) = {2 / 4:.3f})")

# Three restarts of Adam on the negative log-likelihood; this takes ~10 s
result = train(data, TrainConfig(dim=2, seed=0))
model = result.best_model
print(f"restart costs (bits): {np.round(result.restart_costs, 2)}")
print(f"best restart: {result.best_restart}, iterations: {result.iterations_used}")
print(f"completeness error of the learned Kraus set: {model.completeness_error():.1e}")

quantum = distortion(machine, model).value
classical = classical_lower_bound(machine, 2, K=3).bound
print(f"\nquantum distortion (d=2):     {quantum:.5f} bits/symbol")
print(f"classical lower bound (d=2):  {classical:.5f} bits/symbol")
print("quantum beats every 2-state classical model:", quantum < classical)

# How the learned memory encodes recent history
print("\npast   P(next=1)   Bloch (x, y, z)")
for past in [(1, 1), (1, 0), (0, 0)]:
    state = encode_past(model, [0, 0, 1] + list(past))
    p1 = conditional_next(model, state)[1]
    x, y, z = bloch_coordinates(state)
    print(f"{''.join(map(str, past)):>4}   {p1:9.3f}   ({x:+.3f}, {y:+.3f}, {z:+.3f})")

U = complete_unitary(model)
print(f"\nunitary on memory (x) output: shape {U.shape}, |U^dag U - I| = {np.abs(U.conj().T @ U - np.eye(4)).max():.1e}")
