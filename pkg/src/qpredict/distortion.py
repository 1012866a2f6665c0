"""Predictive distortion of a model against a known process.

The distortion is the past-averaged, per-symbol KL divergence between the
process's conditional future and the model's prediction for that past.
Pasts are enumerated exactly at a fixed length; all logs are base 2.

A predictor is any object with ``future_distribution(past, length)``
returning probabilities of all ``length``-words in lexicographic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol, Sequence

import numpy as np

from .errors import GuardError, ValidationError, ZeroProbabilityError
from .process import (
    ENUMERATION_GUARD,
    EpsilonMachine,
    all_words,
    markov_order,
    propagate_words,
    state_morphs,
    stationary_distribution,
)
from .quantum import KrausModel, encode_past, future_distribution

DEFAULT_PAST_LENGTH = 5
ORDER_CAP = 64


class Predictor(Protocol):
    def future_distribution(self, past: Sequence[int], length: int) -> np.ndarray: ...


@dataclass(frozen=True)
class EvalProtocol:
    past_length: int | None = None  # None: max(5, Markov order)
    future_length: int = 1
    probability_floor: float = 1e-12

    def __post_init__(self):
        if self.future_length < 1:
            raise ValidationError("future length must be >= 1")
        if self.past_length is not None and self.past_length < 0:
            raise ValidationError("past length must be >= 0")
        if not self.probability_floor > 0:
            raise ValidationError("probability floor must be positive")

    def resolve(self, machine: EpsilonMachine) -> "EvalProtocol":
        if self.past_length is not None:
            return self
        kappa = markov_order(machine, ORDER_CAP)
        return replace(self, past_length=max(DEFAULT_PAST_LENGTH, kappa or 0))


@dataclass(frozen=True)
class DistortionReport:
    value: float
    clamped_terms: int
    protocol: EvalProtocol


def _kl_terms(p, q, floor: float) -> tuple[float, int]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"length mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    qs = q[support]
    clamped = int(np.count_nonzero(qs < floor))
    ps = p[support]
    return math.fsum(ps * np.log2(ps / np.maximum(qs, floor))), clamped


def kl_divergence(p, q, floor: float = 1e-12) -> float:
    """``sum p log2(p / max(q, floor))`` over the support of p."""
    p = np.asarray(p, dtype=float)
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"p must sum to 1, got {p.sum()!r}")
    return _kl_terms(p, q, floor)[0]


class _MachineState:
    """Cached stationary weights and morphs for repeated conditional queries."""

    def __init__(self, machine: EpsilonMachine):
        self.machine = machine
        self.pi = stationary_distribution(machine)
        self._morphs: dict[int, np.ndarray] = {}

    def morphs(self, length: int) -> np.ndarray:
        if length not in self._morphs:
            self._morphs[length] = state_morphs(self.machine, length)
        return self._morphs[length]

    def belief(self, past: Sequence[int]) -> np.ndarray | None:
        belief = self.pi
        T = self.machine.labeled_matrices
        for x in past:
            belief = belief @ T[x]
            total = belief.sum()
            if total <= 0.0:
                return None
            belief = belief / total
        return belief


class MachinePredictor:
    """Predicts with another machine's exact conditionals (stationary start)."""

    def __init__(self, machine: EpsilonMachine):
        self._state = _MachineState(machine)

    def future_distribution(self, past, length):
        belief = self._state.belief(past)
        if belief is None:
            raise ZeroProbabilityError(f"predictor machine forbids past {tuple(past)}")
        return belief @ self._state.morphs(length)


class QuantumPredictor:
    """Encodes each past into a pure memory state and reads off future statistics."""

    def __init__(self, model: KrausModel):
        self.model = model

    def future_distribution(self, past, length):
        return future_distribution(self.model, encode_past(self.model, past), length)


def as_predictor(obj) -> Predictor:
    if isinstance(obj, KrausModel):
        return QuantumPredictor(obj)
    if isinstance(obj, EpsilonMachine):
        return MachinePredictor(obj)
    if hasattr(obj, "future_distribution"):
        return obj
    raise TypeError(f"cannot use {type(obj).__name__} as a predictor")


def distortion(machine: EpsilonMachine, predictor, protocol: EvalProtocol = EvalProtocol()) -> DistortionReport:
    """Mean over length-``past_length`` pasts of ``P(past) * KL / future_length``."""
    protocol = protocol.resolve(machine)
    ell, L = protocol.past_length, protocol.future_length
    A = machine.alphabet_size
    if A ** (ell + L) > ENUMERATION_GUARD:
        raise GuardError(f"{A}^{ell + L} past/future combinations exceed the guard")
    predictor = as_predictor(predictor)
    truth = _MachineState(machine)
    past_probs = propagate_words(machine, truth.pi, ell).sum(axis=1)
    words = all_words(A, ell)
    terms = []
    clamped = 0
    for i in np.flatnonzero(past_probs > 0):
        past = words[i]
        p = truth.belief(past) @ truth.morphs(L)
        q = predictor.future_distribution(past, L)
        kl, c = _kl_terms(p, q, protocol.probability_floor)
        clamped += c
        terms.append(past_probs[i] * kl / L)
    value = max(math.fsum(terms), 0.0)
    return DistortionReport(value, clamped, protocol)


def distortion_L_sweep(machine, predictor, past_length: int, L_list: Sequence[int], floor: float = 1e-12) -> list[float]:
    return [
        distortion(machine, predictor, EvalProtocol(past_length, L, floor)).value for L in L_list
    ]


def state_weighted_distortion(machine: EpsilonMachine, predictions: np.ndarray, length: int, floor: float = 1e-12) -> float:
    """Shortcut for predictors that depend on the past only through its causal state.

    ``predictions[s]`` is the predicted distribution over ``length``-words for
    pasts in state s; the result is ``sum_s pi_s KL(P(.|s) || predictions[s]) / length``.
    """
    pi = stationary_distribution(machine)
    morphs = state_morphs(machine, length)
    terms = [pi[s] * _kl_terms(morphs[s], predictions[s], floor)[0] / length for s in range(len(pi))]
    return max(math.fsum(terms), 0.0)
