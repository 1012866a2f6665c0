"""Maximum-likelihood training of Kraus models from a symbol sequence.

The free parameters are the real and imaginary parts of the unconstrained
matrices ``B_x``; the cost is ``-log2 P_B(data)``. Gradients come from
central finite differences, evaluated for all coordinates in one batched
likelihood call. Adam drives the descent and the best of several random
restarts wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericalError, TrainingFailedError, ValidationError
from .quantum import KrausModel, ParamSet, log2_likelihood_batch, real_vector_to_matrices, recover_kraus

log = logging.getLogger(__name__)

MAX_INIT_ATTEMPTS = 20


@dataclass(frozen=True)
class TrainConfig:
    dim: int
    alphabet_size: int = 2
    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    restarts: int = 3
    delta_c_threshold: float = 0.1
    stall_window: int = 10
    max_iters: int = 10_000
    fd_step: float = 1e-6
    seed: int = 0
    anchor: int = 0
    restart_seeds: tuple | None = None

    def __post_init__(self):
        if self.dim < 1 or self.alphabet_size < 1:
            raise ValidationError("dim and alphabet_size must be positive")
        if self.learning_rate <= 0:
            raise ValidationError("learning rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValidationError("Adam betas must lie in (0, 1)")
        if self.restarts < 1:
            raise ValidationError("need at least one restart")
        if self.fd_step <= 0:
            raise ValidationError("finite-difference step must be positive")
        if self.stall_window < 1 or self.max_iters < 1:
            raise ValidationError("stall_window and max_iters must be positive")
        if self.restart_seeds is not None and len(self.restart_seeds) != self.restarts:
            raise ValidationError("restart_seeds must have one entry per restart")

    def seed_for_restart(self, r: int):
        if self.restart_seeds is not None:
            return self.restart_seeds[r]
        return [self.seed, r]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


@dataclass
class TrainResult:
    best_params: ParamSet
    best_model: KrausModel
    final_cost: float
    cost_trace: list[float]
    restart_costs: list[float]
    iterations_used: list[int]
    seed: int
    best_restart: int
    restart_traces: list[list[float]] = field(default_factory=list)


def _as_data(data: Sequence[int], alphabet_size: int) -> np.ndarray:
    data = np.asarray(data, dtype=np.int64)
    if data.ndim != 1:
        raise ValidationError("data must be a one-dimensional symbol sequence")
    if data.size and (data.min() < 0 or data.max() >= alphabet_size):
        raise ValidationError(f"data symbols must lie in [0, {alphabet_size})")
    return data


def cost(params: ParamSet, data: Sequence[int]) -> float:
    """Negative log2-likelihood of ``data``; ``inf`` when the model forbids it."""
    data = _as_data(data, params.alphabet_size)
    return float(-log2_likelihood_batch(params.matrices[None], data)[0])


def _costs(thetas, data, alphabet_size, dim, warm_start=False) -> np.ndarray:
    mats = real_vector_to_matrices(thetas, alphabet_size, dim)
    return -log2_likelihood_batch(mats, data, warm_start)


def _cost_and_gradient(theta, data, alphabet_size, dim, h):
    """Cost at ``theta`` and its central-difference gradient in one batch."""
    p = theta.size
    stencil = np.empty((2 * p + 1, p))
    stencil[:] = theta
    idx = np.arange(p)
    stencil[1 + idx, idx] += h
    stencil[1 + p + idx, idx] -= h
    values = _costs(stencil, data, alphabet_size, dim, warm_start=True)
    with np.errstate(invalid="ignore"):
        grad = (values[1 : p + 1] - values[p + 1 :]) / (2 * h)
    valid = bool(np.all(np.isfinite(values)))
    return values[0], grad, valid


def gradient(params: ParamSet, data: Sequence[int], step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of :func:`cost`.

    Ordered like :meth:`ParamSet.to_real_vector`: all real parts of
    ``B[x, j, k]`` (C order) followed by all imaginary parts.
    """
    data = _as_data(data, params.alphabet_size)
    _, grad, valid = _cost_and_gradient(
        params.to_real_vector(), data, params.alphabet_size, params.dim, step
    )
    if not valid:
        raise NumericalError("cost is infinite inside the finite-difference stencil")
    return grad


def adam_step(theta, grads, state: AdamState, config: TrainConfig, t: int):
    """One bias-corrected Adam update; ``t`` counts from 1. Inputs are not mutated."""
    b1, b2 = config.adam_beta1, config.adam_beta2
    m = b1 * state.m + (1 - b1) * grads
    v = b2 * state.v + (1 - b2) * grads * grads
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
    return theta, AdamState(m, v)


def _random_theta(rng, config: TrainConfig) -> np.ndarray:
    # complex Gaussian entries with total std 1/sqrt(d): each part gets 1/sqrt(2d)
    size = 2 * config.alphabet_size * config.dim**2
    return rng.normal(scale=1.0 / np.sqrt(2 * config.dim), size=size)


def _fresh_start(rng, data, config):
    for _ in range(MAX_INIT_ATTEMPTS):
        theta = _random_theta(rng, config)
        if np.isfinite(_costs(theta[None], data, config.alphabet_size, config.dim)[0]):
            return theta
    return None


def _run_restart(data: np.ndarray, config: TrainConfig, r: int):
    rng = np.random.default_rng(config.seed_for_restart(r))
    theta = _fresh_start(rng, data, config)
    if theta is None:
        return np.inf, None, [], 0
    state = AdamState.zeros(theta.size)
    best_cost, best_theta = np.inf, theta
    trace: list[float] = []
    running_best: list[float] = []
    t = 0
    for it in range(config.max_iters):
        c, grad, valid = _cost_and_gradient(
            theta, data, config.alphabet_size, config.dim, config.fd_step
        )
        if not valid:
            # zero-likelihood neighbourhood: no usable gradient, start over
            theta = _fresh_start(rng, data, config)
            if theta is None:
                break
            state, t = AdamState.zeros(theta.size), 0
            continue
        trace.append(float(c))
        if c < best_cost:
            best_cost, best_theta = float(c), theta
        running_best.append(best_cost)
        w = config.stall_window
        if len(running_best) > w and running_best[-1 - w] - running_best[-1] < config.delta_c_threshold:
            break
        t += 1
        theta, state = adam_step(theta, grad, state, config, t)
    if np.isfinite(best_cost):
        # report the cold-path value so it matches cost() on the returned parameters
        best_cost = float(_costs(best_theta[None], data, config.alphabet_size, config.dim)[0])
    return best_cost, best_theta, trace, len(trace)


def train(data: Sequence[int], config: TrainConfig) -> TrainResult:
    data = _as_data(data, config.alphabet_size)
    runs = [_run_restart(data, config, r) for r in range(config.restarts)]
    restart_costs = [run[0] for run in runs]
    finite = [r for r, c in enumerate(restart_costs) if np.isfinite(c)]
    if not finite:
        raise TrainingFailedError(
            f"all {config.restarts} restarts diverged (infinite cost); "
            f"iterations used: {[run[3] for run in runs]}"
        )
    # ties go to the lowest restart index
    best = min(finite, key=lambda r: (restart_costs[r], r))
    best_cost, best_theta, trace, _ = runs[best]
    params = ParamSet.from_real_vector(best_theta, config.alphabet_size, config.dim)
    model, _ = recover_kraus(params, anchor=config.anchor)
    log.info("restart costs %s, best restart %d", restart_costs, best)
    return TrainResult(
        best_params=params,
        best_model=model,
        final_cost=best_cost,
        cost_trace=trace,
        restart_costs=restart_costs,
        iterations_used=[run[3] for run in runs],
        seed=config.seed,
        best_restart=best,
        restart_traces=[run[2] for run in runs],
    )
