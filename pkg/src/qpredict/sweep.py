"""Grid experiments: train quantum models across machines and dimensions.

Each grid point trains on data sampled from the machine with the row's seed,
scores the learned model, and records the classical coarse-graining bound
at the same dimension. Rows come back in grid order (machine, dim, seed)
regardless of how many worker processes ran them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .bound import classical_lower_bound
from .distortion import EvalProtocol, distortion
from .errors import ValidationError
from .io import read_machine
from .process import EpsilonMachine, markov_order, sample_sequence, uniform_renewal
from .trainer import TrainConfig, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSpec:
    """A machine family, a parameter grid over it, and the model dimensions to try.

    ``family`` is ``"renewal"`` (``params`` are N values) or ``"files"``
    (``params`` are machine-file paths). For the renewal family the bound is
    taken over N-symbol blocks, for machine files over Markov-order blocks.
    ``cap_dims`` drops dimensions above a machine's state count.
    """

    family: str
    params: tuple
    dims: tuple[int, ...]
    seeds: tuple[int, ...] = (0,)
    length: int = 5000
    train_config: TrainConfig = field(default_factory=lambda: TrainConfig(dim=1))
    protocol: EvalProtocol = EvalProtocol()
    cap_dims: bool = False

    def __post_init__(self):
        if self.family not in ("renewal", "files"):
            raise ValidationError(f"unknown machine family {self.family!r}")
        if not self.params or not self.dims or not self.seeds:
            raise ValidationError("sweep grid must be nonempty")
        if min(self.dims) < 1:
            raise ValidationError("dims must be >= 1")
        if self.length < 1:
            raise ValidationError("sequence length must be positive")


@dataclass(frozen=True)
class _Point:
    family: str
    name: str
    param: str
    machine: EpsilonMachine
    dim: int
    seed: int
    bound: float
    bound_K: int


def _machines(spec: SweepSpec):
    for p in spec.params:
        if spec.family == "renewal":
            N = int(p)
            yield f"renewal{N}", str(N), uniform_renewal(N), N
        else:
            machine = read_machine(p)
            kappa = markov_order(machine, 16)
            if kappa is None:
                raise ValidationError(f"{p}: Markov order above 16, no bound block length")
            yield Path(p).stem, Path(p).stem, machine, max(kappa, 1)


def grid_points(spec: SweepSpec) -> list[_Point]:
    points = []
    for name, param, machine, K in _machines(spec):
        for dim in spec.dims:
            if spec.cap_dims and dim > machine.num_states:
                continue
            bound = classical_lower_bound(machine, dim, K=K).bound
            for seed in spec.seeds:
                points.append(_Point(spec.family, name, param, machine, dim, seed, bound, K))
    return points


def _run_point(point: _Point, length: int, config: TrainConfig, protocol: EvalProtocol) -> dict:
    machine = point.machine
    data = sample_sequence(machine, length, point.seed)
    config = replace(config, dim=point.dim, alphabet_size=machine.alphabet_size, seed=point.seed)
    result = train(data, config)
    report = distortion(machine, result.best_model, protocol)
    log.info("%s dim=%d seed=%d: D=%.5f bound=%.5f", point.name, point.dim, point.seed, report.value, point.bound)
    return {
        "family": point.family,
        "machine": point.name,
        "param": point.param,
        "dim": point.dim,
        "quantum_distortion": report.value,
        "classical_bound": point.bound,
        "bound_K": point.bound_K,
        "clamped_terms": report.clamped_terms,
        "final_cost": result.final_cost,
        "seed": point.seed,
    }


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[dict]:
    points = grid_points(spec)
    args = ([spec.length] * len(points), [spec.train_config] * len(points), [spec.protocol] * len(points))
    if jobs <= 1:
        return [_run_point(p, *a) for p, *a in zip(points, *args)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so rows stay in grid order
        return list(pool.map(_run_point, points, *args))


def majority_non_increasing(rows: Sequence[dict], column: str = "quantum_distortion") -> dict[str, bool]:
    """Per machine: is ``column`` non-increasing in dim for most seeds?

    A seed counts as a vote for the trend when its values, ordered by dim,
    never go up. Ties are resolved against the trend.
    """
    by_machine: dict[str, dict[int, dict[int, float]]] = {}
    for row in rows:
        by_machine.setdefault(row["machine"], {}).setdefault(int(row["seed"]), {})[int(row["dim"])] = float(row[column])
    verdict = {}
    for name, seeds in by_machine.items():
        votes = []
        for per_dim in seeds.values():
            values = [per_dim[d] for d in sorted(per_dim)]
            votes.append(all(b <= a for a, b in zip(values, values[1:])))
        verdict[name] = sum(votes) > len(votes) / 2
    return verdict
