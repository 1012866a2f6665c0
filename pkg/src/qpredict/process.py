"""Stationary unifilar hidden Markov models (epsilon-machines).

A machine is stored as a partial map ``(state, symbol) -> (next_state, prob)``.
Everything the rest of the package needs from the true process is exact:
stationary state weights, word probabilities, conditional futures given a
finite past, Markov order, and seeded sampling.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GuardError, NumericalError, ValidationError, ZeroProbabilityError

INPUT_TOL = 1e-9
ENUMERATION_GUARD = 10**6
DENSE_STATE_LIMIT = 64


@dataclass(frozen=True)
class EpsilonMachine:
    num_states: int
    alphabet_size: int
    transitions: Mapping[tuple[int, int], tuple[int, float]]
    name: str = ""
    state_names: tuple[str, ...] = ()
    _labeled: np.ndarray = field(init=False, repr=False, compare=False)
    _successor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.num_states < 1 or self.alphabet_size < 1:
            raise ValidationError("machine needs at least one state and one symbol")
        labeled = np.zeros((self.alphabet_size, self.num_states, self.num_states))
        successor = np.full((self.num_states, self.alphabet_size), -1, dtype=np.int64)
        for (s, x), (t, p) in self.transitions.items():
            if not (0 <= s < self.num_states and 0 <= t < self.num_states):
                raise ValidationError(f"state index out of range in transition {(s, x, t)}")
            if not 0 <= x < self.alphabet_size:
                raise ValidationError(f"symbol {x} out of range [0, {self.alphabet_size})")
            if not 0.0 < p <= 1.0 + INPUT_TOL:
                raise ValidationError(f"transition probability {p} not in (0, 1]")
            labeled[x, s, t] = p
            successor[s, x] = t
        rows = labeled.sum(axis=(0, 2))
        bad = np.flatnonzero(np.abs(rows - 1.0) > INPUT_TOL)
        if bad.size:
            raise ValidationError(
                f"row not normalized: state {int(bad[0])} sums to {rows[bad[0]]!r}"
            )
        # renormalize so internal identities hold to 1e-12
        labeled /= rows[None, :, None]
        if not _irreducible(labeled.sum(axis=0) > 0):
            raise ValidationError("machine is not irreducible: some state is unreachable")
        labeled.setflags(write=False)
        successor.setflags(write=False)
        object.__setattr__(self, "_labeled", labeled)
        object.__setattr__(self, "_successor", successor)
        if not self.state_names:
            object.__setattr__(
                self, "state_names", tuple(f"s{i}" for i in range(self.num_states))
            )

    @property
    def labeled_matrices(self) -> np.ndarray:
        """``T[x, s, t]`` = probability of emitting x and moving s -> t."""
        return self._labeled

    @property
    def transition_matrix(self) -> np.ndarray:
        return self._labeled.sum(axis=0)

    @property
    def successor(self) -> np.ndarray:
        """``successor[s, x]`` is the next state, or -1 where x is forbidden."""
        return self._successor

    def emission_probs(self) -> np.ndarray:
        """Next-symbol distribution of every state, shape (num_states, alphabet)."""
        return self._labeled.sum(axis=2).T


def _irreducible(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    for start in range(n):
        seen = {start}
        frontier = [start]
        while frontier:
            s = frontier.pop()
            for t in np.flatnonzero(adjacency[s]):
                if int(t) not in seen:
                    seen.add(int(t))
                    frontier.append(int(t))
        if len(seen) != n:
            return False
    return True


def machine_from_rows(
    rows: Iterable[tuple[int, int, int, float]],
    num_states: int,
    alphabet_size: int,
    name: str = "",
    state_names: Sequence[str] = (),
) -> EpsilonMachine:
    """Build a machine from ``(from, symbol, to, prob)`` rows, rejecting duplicates."""
    transitions: dict[tuple[int, int], tuple[int, float]] = {}
    for s, x, t, p in rows:
        key = (int(s), int(x))
        if key in transitions:
            raise ValidationError(f"non-unifilar: duplicate entry for (state {s}, symbol {x})")
        transitions[key] = (int(t), float(p))
    return EpsilonMachine(num_states, alphabet_size, transitions, name, tuple(state_names))


def load_machine(definition: Mapping) -> EpsilonMachine:
    """Validate a machine-definition document (already parsed from JSON).

    Schema: ``{"alphabet_size": int, "states": [names],
    "transitions": [{"from", "symbol", "to", "prob"}], "name"?: str}``.
    """
    try:
        alphabet_size = int(definition["alphabet_size"])
        states = [str(s) for s in definition["states"]]
        raw = definition["transitions"]
        rows = [(int(r["from"]), int(r["symbol"]), int(r["to"]), float(r["prob"])) for r in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed machine definition: {exc!r}") from exc
    return machine_from_rows(
        rows, len(states), alphabet_size, str(definition.get("name", "")), states
    )


def machine_to_document(machine: EpsilonMachine) -> dict:
    rows = [
        {"from": s, "symbol": x, "to": t, "prob": p}
        for (s, x), (t, p) in sorted(machine.transitions.items())
    ]
    return {
        "name": machine.name,
        "alphabet_size": machine.alphabet_size,
        "states": list(machine.state_names),
        "transitions": rows,
    }


def uniform_renewal(N: int) -> EpsilonMachine:
    """Renewal process whose gap (number of 0s between ticks) is uniform on {0..N-1}.

    State s_k means k zeros since the last tick; the hazard there is 1/(N-k).
    """
    if N < 1:
        raise ValidationError("uniform renewal needs N >= 1")
    rows = []
    for k in range(N):
        hazard = 1.0 / (N - k)
        rows.append((k, 1, 0, hazard))
        if k < N - 1:
            rows.append((k, 0, k + 1, 1.0 - hazard))
    return machine_from_rows(rows, N, 2, name=f"uniform_renewal_{N}")


def stationary_distribution(machine: EpsilonMachine, max_iter: int = 100_000) -> np.ndarray:
    T = machine.transition_matrix
    n = T.shape[0]
    if n == 1:
        return np.ones(1)
    if n <= DENSE_STATE_LIMIT:
        # (T^T - I) pi = 0 with one equation swapped for sum(pi) = 1
        system = T.T - np.eye(n)
        system[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        pi = np.linalg.solve(system, rhs)
    else:
        pi = np.full(n, 1.0 / n)
        for _ in range(max_iter):
            nxt = pi @ T
            if np.abs(nxt - pi).sum() < 1e-15:
                pi = nxt
                break
            pi = nxt
        else:
            raise NumericalError(f"stationary distribution did not converge in {max_iter} iterations")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _check_guard(alphabet_size: int, length: int) -> None:
    if alphabet_size**length > ENUMERATION_GUARD:
        raise GuardError(
            f"enumerating {alphabet_size}^{length} words exceeds the guard of {ENUMERATION_GUARD}"
        )


def all_words(alphabet_size: int, length: int) -> list[tuple[int, ...]]:
    """Words in lexicographic order; index i matches the rows of the array routines."""
    _check_guard(alphabet_size, length)
    return list(itertools.product(range(alphabet_size), repeat=length))


def propagate_words(machine: EpsilonMachine, initial: np.ndarray, length: int) -> np.ndarray:
    """Joint weights ``out[w, t] = sum_s initial[s] * P(w, end in t | start s)``.

    Rows follow lexicographic word order (first symbol most significant).
    """
    _check_guard(machine.alphabet_size, length)
    T = machine.labeled_matrices
    weights = np.asarray(initial, dtype=float)[None, :]
    for _ in range(length):
        # (words, states) x (symbols, states, states) -> (words, symbols, states)
        weights = np.einsum("ws,xst->wxt", weights, T).reshape(-1, machine.num_states)
    return weights


def state_morphs(machine: EpsilonMachine, K: int) -> np.ndarray:
    """``out[s, w] = P(X_{0:K} = w | causal state s)``."""
    return np.stack(
        [propagate_words(machine, row, K).sum(axis=1) for row in np.eye(machine.num_states)]
    )


def word_probabilities(machine: EpsilonMachine, K: int) -> np.ndarray:
    """Array form of :func:`word_distribution` in lexicographic order."""
    return propagate_words(machine, stationary_distribution(machine), K).sum(axis=1)


def word_distribution(machine: EpsilonMachine, K: int) -> dict[tuple[int, ...], float]:
    probs = word_probabilities(machine, K)
    return dict(zip(all_words(machine.alphabet_size, K), probs.tolist()))


def past_belief(machine: EpsilonMachine, past: Sequence[int]) -> np.ndarray:
    """Distribution over causal states after observing ``past`` from stationarity."""
    belief = stationary_distribution(machine)
    T = machine.labeled_matrices
    for x in past:
        if not 0 <= x < machine.alphabet_size:
            raise ValidationError(f"symbol {x} out of range")
        belief = belief @ T[x]
        total = belief.sum()
        if total <= 0.0:
            raise ZeroProbabilityError(f"past {tuple(past)} has probability 0 under the machine")
        belief = belief / total
    return belief


def conditional_future_probabilities(
    machine: EpsilonMachine, past: Sequence[int], K: int
) -> np.ndarray:
    return past_belief(machine, past) @ state_morphs(machine, K)


def conditional_future(
    machine: EpsilonMachine, past: Sequence[int], K: int
) -> dict[tuple[int, ...], float]:
    probs = conditional_future_probabilities(machine, past, K)
    return dict(zip(all_words(machine.alphabet_size, K), probs.tolist()))


def markov_order(machine: EpsilonMachine, cap: int) -> int | None:
    """Smallest k <= cap such that every allowed length-k word synchronizes.

    Returns ``None`` when the order exceeds ``cap``. Tracks the set of states a
    word can end in (from all compatible starts) rather than the words
    themselves, so the cost is bounded by the number of reachable subsets.
    """
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    succ = machine.successor
    layer = {frozenset(range(machine.num_states))}
    for k in range(cap + 1):
        if all(len(ends) == 1 for ends in layer):
            return k
        nxt = set()
        for ends in layer:
            for x in range(machine.alphabet_size):
                moved = frozenset(int(succ[s, x]) for s in ends if succ[s, x] >= 0)
                if moved:
                    nxt.add(moved)
        layer = nxt
    return None


def synchronized_state(machine: EpsilonMachine, past: Sequence[int]) -> int | None:
    """The causal state a past pins down, or None if it does not synchronize."""
    ends = set(range(machine.num_states))
    succ = machine.successor
    for x in past:
        ends = {int(succ[s, x]) for s in ends if succ[s, x] >= 0}
        if not ends:
            raise ZeroProbabilityError(f"past {tuple(past)} has probability 0 under the machine")
    return ends.pop() if len(ends) == 1 else None


def sample_sequence(machine: EpsilonMachine, length: int, seed) -> np.ndarray:
    """Draw ``length`` symbols starting from a stationary state.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if length < 0:
        raise ValidationError("length must be >= 0")
    rng = np.random.default_rng(seed)
    pi = stationary_distribution(machine)
    succ = machine.successor
    emit = machine.emission_probs()
    # per state: allowed symbols and their cumulative weights (forbidden symbols never drawn)
    allowed = [np.flatnonzero(succ[s] >= 0) for s in range(machine.num_states)]
    cdfs = [np.cumsum(emit[s, allowed[s]]) for s in range(machine.num_states)]
    state = _draw(np.cumsum(pi), rng.random())
    uniforms = rng.random(length)
    out = np.empty(length, dtype=np.int64)
    for i in range(length):
        x = int(allowed[state][_draw(cdfs[state], uniforms[i])])
        out[i] = x
        state = int(succ[state, x])
    return out


def _draw(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(cdf) - 1)
