"""Lower bound on the distortion of dimension-limited classical models.

Any unifilar classical model with at most ``d`` memory states is bounded
below by the best coarse-graining of the causal states into at most ``d``
blocks, where each block predicts the next ``K`` symbols with a single
distribution. For a fixed block that distribution is found in closed form:
the stationary-weight mixture of the member states' morphs minimizes the
weighted KL divergence with the model in the second argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .distortion import _kl_terms
from .errors import GuardError, ValidationError
from .process import (
    ENUMERATION_GUARD,
    EpsilonMachine,
    markov_order,
    state_morphs,
    stationary_distribution,
    synchronized_state,
)

PARTITION_GUARD = 10**6
# partition values closer than this count as tied (merged identical morphs leave ~1e-17 residue)
TIE_TOL = 1e-14
ORDER_CAP = 16


@dataclass(frozen=True)
class StatePartition:
    blocks: tuple[tuple[int, ...], ...]

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def num_states(self) -> int:
        return sum(len(b) for b in self.blocks)

    def labels(self) -> tuple[int, ...]:
        """Restricted growth string: ``labels[s]`` is the block holding state s."""
        out = [0] * self.num_states
        for i, block in enumerate(self.blocks):
            for s in block:
                out[s] = i
        return tuple(out)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "StatePartition":
        blocks: dict[int, list[int]] = {}
        for s, b in enumerate(labels):
            blocks.setdefault(b, []).append(s)
        return cls(tuple(tuple(blocks[b]) for b in sorted(blocks)))


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if n == 0 or k == 0:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def count_partitions(n: int, max_blocks: int) -> int:
    return sum(stirling2(n, k) for k in range(1, min(n, max_blocks) + 1))


def enumerate_partitions(num_states: int, max_blocks: int) -> list[StatePartition]:
    """All set partitions of ``range(num_states)`` into at most ``max_blocks`` blocks.

    Ordered lexicographically by restricted growth string, which is also the
    tie-break order used by :func:`classical_lower_bound`.
    """
    if num_states < 1 or max_blocks < 1:
        raise ValidationError("need at least one state and one block")
    total = count_partitions(num_states, max_blocks)
    if total > PARTITION_GUARD:
        raise GuardError(f"{total} partitions exceed the guard of {PARTITION_GUARD}")
    out = []

    def grow(labels: list[int], used: int):
        if len(labels) == num_states:
            out.append(StatePartition.from_labels(labels))
            return
        for b in range(min(used + 1, max_blocks)):
            labels.append(b)
            grow(labels, max(used, b + 1))
            labels.pop()

    grow([], 0)
    return out


def _morph_guard(machine: EpsilonMachine, K: int) -> None:
    if K < 1:
        raise ValidationError("K must be >= 1")
    if machine.alphabet_size**K > ENUMERATION_GUARD:
        raise GuardError(f"{machine.alphabet_size}^{K} words exceed the guard")


def _merged(pi, morphs, block, K):
    weights = pi[list(block)]
    if len(block) == 1:
        return morphs[block[0]], 0.0
    mixture = weights @ morphs[list(block)] / weights.sum()
    contrib = math.fsum(w * _kl_terms(morphs[s], mixture, 1e-300)[0] for w, s in zip(weights, block))
    return mixture, contrib / K


def optimal_merged_morph(machine: EpsilonMachine, block: Sequence[int], K: int):
    """Best shared K-word distribution for a block of causal states.

    Returns ``(morph, contribution)`` where contribution is the block's share
    of the per-symbol distortion, ``sum_i pi_i KL(P(.|s_i) || morph) / K``.
    """
    block = tuple(sorted(block))
    if not block:
        raise ValidationError("block must be nonempty")
    _morph_guard(machine, K)
    return _merged(stationary_distribution(machine), state_morphs(machine, K), block, K)


@dataclass(frozen=True, eq=False)
class CoarseGrainedModel:
    """A pre-model: causal states merged into blocks, one K-word morph per block.

    Used as a predictor, a past is mapped to the causal state it synchronizes
    to, then to that state's block.
    """

    machine: EpsilonMachine
    partition: StatePartition
    morphs: np.ndarray  # (blocks, alphabet**K)
    K: int

    def __eq__(self, other):
        if not isinstance(other, CoarseGrainedModel):
            return NotImplemented
        return (
            self.machine == other.machine
            and self.partition == other.partition
            and self.K == other.K
            and np.array_equal(self.morphs, other.morphs)
        )

    __hash__ = None

    def prediction_for_state(self, state: int, length: int) -> np.ndarray:
        morph = self.morphs[self.partition.labels()[state]]
        if length > self.K:
            raise ValidationError(f"morphs only cover {self.K} symbols, asked for {length}")
        A = self.machine.alphabet_size
        return morph.reshape((A**length, -1)).sum(axis=1)

    def future_distribution(self, past, length):
        state = synchronized_state(self.machine, past)
        if state is None:
            raise ValidationError(f"past {tuple(past)} does not identify a causal state")
        return self.prediction_for_state(state, length)


@dataclass(frozen=True)
class BoundReport:
    bound: float
    best: CoarseGrainedModel
    K: int
    tight: bool
    markov_order: int
    per_partition: tuple[tuple[StatePartition, float], ...]


def classical_lower_bound(
    machine: EpsilonMachine, max_dim: int, K: int | None = None, order_cap: int = ORDER_CAP
) -> BoundReport:
    """Minimum over coarse-grainings into <= ``max_dim`` blocks of the merged distortion.

    ``K`` defaults to the Markov order (at least 1). The bound is flagged tight
    only for K = Markov order = 1, the case where it is achieved by a unifilar model.
    """
    if max_dim < 1:
        raise ValidationError("model dimension must be >= 1")
    kappa = markov_order(machine, order_cap)
    if kappa is None:
        raise GuardError(f"Markov order exceeds the cap of {order_cap}")
    K = max(kappa, 1) if K is None else K
    _morph_guard(machine, K)
    pi = stationary_distribution(machine)
    morphs = state_morphs(machine, K)
    cache: dict[tuple[int, ...], tuple[np.ndarray, float]] = {}
    results = []
    best = None
    for partition in enumerate_partitions(machine.num_states, max_dim):
        value_terms = []
        for block in partition.blocks:
            if block not in cache:
                cache[block] = _merged(pi, morphs, block, K)
            value_terms.append(cache[block][1])
        value = math.fsum(value_terms)
        results.append((partition, value))
        if best is None or value < best[1] - TIE_TOL:
            best = (partition, value)
    partition, value = best
    model = CoarseGrainedModel(
        machine, partition, np.stack([cache[b][0] for b in partition.blocks]), K
    )
    return BoundReport(
        bound=value,
        best=model,
        K=K,
        tight=(kappa == 1 and K == 1),
        markov_order=kappa,
        per_partition=tuple(results),
    )
