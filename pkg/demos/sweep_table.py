"""A small renewal-family sweep: quantum distortion vs the classical bound.

Trains one model per (N, d) on the N <= 3 grid for two data seeds and writes
the rows to sweep.csv in the working directory. Takes about a minute.
For the full grid use the CLI, e.g.
    qpredict sweep --renewal 2 3 4 5 --dims 2 3 4 5 --cap-dims --seeds 0 1 2 --out sweep.csv

Run: python demos/sweep_table.py
"""

from __future__ import annotations

from qpredict.io import write_sweep_csv
from qpredict.sweep import SweepSpec, majority_non_increasing, run_sweep

spec = SweepSpec("renewal", (2, 3), (2, 3), seeds=(0, 1), cap_dims=True)
rows = run_sweep(spec)
write_sweep_csv("sweep.csv", rows)

print(f"{'machine':<10}{'dim':>4}{'seed':>6}{'quantum':>10}{'classical':>11}")
for r in rows:
    print(f"{r['machine']:<10}{r['dim']:>4}{r['seed']:>6}{r['quantum_distortion']:>10.5f}{r['classical_bound']:>11.5f}")

print("\nquantum distortion non-increasing in d (majority of seeds):", majority_non_increasing(rows))
