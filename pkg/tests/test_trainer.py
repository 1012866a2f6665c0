from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _machines import random_params
from qpredict import trainer
from qpredict.errors import NumericalError, TrainingFailedError, ValidationError
from qpredict.process import machine_from_rows, sample_sequence, uniform_renewal
from qpredict.quantum import ParamSet, conditional_next
from qpredict.trainer import AdamState, TrainConfig, adam_step, cost, gradient, train


def coin_cost(b0, b1, n0, n1):
    s = abs(b0) ** 2 + abs(b1) ** 2
    return -n0 * math.log2(abs(b0) ** 2 / s) - n1 * math.log2(abs(b1) ** 2 / s)


def coin_gradient(b0, b1, n0, n1):
    # hand derivative of coin_cost in (Re b0, Re b1, Im b0, Im b1)
    s = abs(b0) ** 2 + abs(b1) ** 2
    n = n0 + n1

    def d(part, own, count):
        return -(count * 2 * part / abs(own) ** 2 - n * 2 * part / s) / math.log(2)

    return np.array([d(b0.real, b0, n0), d(b1.real, b1, n1), d(b0.imag, b0, n0), d(b1.imag, b1, n1)])


def coin_data(n0, n1, seed=0):
    data = np.array([0] * n0 + [1] * n1)
    np.random.default_rng(seed).shuffle(data)
    return data


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"learning_rate": 0},
            {"adam_beta1": 1.0},
            {"adam_beta2": 0.0},
            {"restarts": 0},
            {"fd_step": 0},
            {"dim": 0},
            {"restarts": 2, "restart_seeds": (1,)},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            TrainConfig(**{"dim": 2, **kwargs})

    def test_defaults(self):
        c = TrainConfig(dim=2)
        assert (c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon) == (0.1, 0.9, 0.999, 1e-8)
        assert (c.restarts, c.delta_c_threshold, c.stall_window, c.max_iters, c.fd_step) == (3, 0.1, 10, 10_000, 1e-6)


class TestCost:
    def test_empty(self):
        assert cost(ParamSet(random_params(np.random.default_rng(0), 2, 2)), []) == 0.0

    def test_coin_closed_form(self):
        data = coin_data(37, 63)
        b0, b1 = np.sqrt(0.3), np.sqrt(0.7)
        p = ParamSet(np.array([[[b0]], [[b1]]], dtype=complex))
        assert cost(p, data) == pytest.approx(coin_cost(b0, b1, 37, 63), abs=1e-10)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(1)
        B = random_params(rng, 2, 2)
        data = rng.integers(0, 2, size=300)
        assert cost(ParamSet((2 + 1j) * B), data) == pytest.approx(cost(ParamSet(B), data), abs=1e-9)

    def test_rejects_symbols_out_of_range(self):
        with pytest.raises(ValidationError):
            cost(ParamSet(random_params(np.random.default_rng(0), 2, 2)), [0, 2])

    def test_infinite_when_forbidden(self):
        B = np.array([[[1.0]], [[0.0]]], dtype=complex)
        assert cost(ParamSet(B), [0, 1]) == np.inf


class TestGradient:
    def test_coin_hand_derivative(self):
        b0, b1 = 0.6 + 0.2j, 0.5 - 0.4j
        p = ParamSet(np.array([[[b0]], [[b1]]]))
        data = coin_data(50, 50)
        g = gradient(p, data)
        assert np.allclose(g, coin_gradient(b0, b1, 50, 50), rtol=1e-6, atol=1e-6)

    def test_richardson(self):
        b0, b1 = 0.6 + 0.2j, 0.5 - 0.4j
        p = ParamSet(np.array([[[b0]], [[b1]]]))
        data = coin_data(30, 70)
        exact = coin_gradient(b0, b1, 30, 70)
        e1 = np.abs(gradient(p, data, step=2e-2) - exact).max()
        e2 = np.abs(gradient(p, data, step=1e-2) - exact).max()
        assert 3.5 < e1 / e2 < 4.5

    def test_flat_scaling_direction(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = ParamSet(random_params(rng, 2, 2))
            data = rng.integers(0, 2, size=200)
            g = gradient(p, data)
            theta = p.to_real_vector()
            assert abs(g @ theta) <= 1e-6 * np.linalg.norm(g) * np.linalg.norm(theta)

    def test_invalid_stencil(self):
        B = np.array([[[1.0]], [[0.0]]], dtype=complex)
        with pytest.raises(NumericalError):
            gradient(ParamSet(B), [0, 1])


class TestAdam:
    config = TrainConfig(dim=1)

    def test_zero_gradient(self):
        theta = np.array([1.0, -2.0])
        new, _ = adam_step(theta, np.zeros(2), AdamState.zeros(2), self.config, 1)
        assert np.array_equal(new, theta)

    def test_first_step_is_signed_lr(self):
        theta = np.zeros(4)
        g = np.array([3.0, -0.01, 1e3, -7.0])
        new, _ = adam_step(theta, g, AdamState.zeros(4), self.config, 1)
        assert np.allclose(new, -0.1 * np.sign(g), rtol=1e-6)

    def test_deterministic_and_pure(self):
        theta, g = np.ones(3), np.array([0.1, -0.2, 0.3])
        state = AdamState(np.full(3, 0.01), np.full(3, 0.02))
        a = adam_step(theta, g, state, self.config, 5)
        b = adam_step(theta, g, state, self.config, 5)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].m, b[1].m)
        assert np.array_equal(state.m, np.full(3, 0.01))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adam_bias_correction(seed):
    # two steps by hand
    rng = np.random.default_rng(seed)
    g1, g2 = rng.normal(size=3), rng.normal(size=3)
    c = TrainConfig(dim=1)
    th1, s1 = adam_step(np.zeros(3), g1, AdamState.zeros(3), c, 1)
    th2, _ = adam_step(th1, g2, s1, c, 2)
    m = 0.1 * 0.9 * g1 + 0.1 * g2
    v = 0.001 * 0.999 * g1**2 + 0.001 * g2**2
    step = 0.1 * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
    assert np.allclose(th2, th1 - step, rtol=1e-12, atol=1e-15)


@pytest.fixture(scope="module")
def renewal_run():
    data = sample_sequence(uniform_renewal(3), 600, 4)
    config = TrainConfig(dim=2, seed=11, max_iters=60)
    return data, config, train(data, config)


class TestTrain:
    def test_coin_mle(self):
        data = sample_sequence(machine_from_rows([(0, 0, 0, 0.3), (0, 1, 0, 0.7)], 1, 2), 5000, 0)
        result = train(data, TrainConfig(dim=1, seed=0))
        p1 = conditional_next(result.best_model, result.best_model.sigma0)[1]
        assert p1 == pytest.approx(data.mean(), abs=0.02)

    def test_result_invariants(self, renewal_run):
        data, config, result = renewal_run
        assert result.final_cost == min(result.restart_costs)
        assert result.final_cost >= 0
        assert cost(result.best_params, data) == pytest.approx(result.final_cost, abs=1e-9)
        assert result.best_model.completeness_error() < 1e-10
        assert len(result.restart_costs) == len(result.iterations_used) == config.restarts
        assert result.seed == config.seed
        assert all(1 <= n <= config.max_iters for n in result.iterations_used)

    def test_bit_identical(self, renewal_run):
        data, config, result = renewal_run
        again = train(data, config)
        assert again.cost_trace == result.cost_trace
        assert again.restart_costs == result.restart_costs
        assert np.array_equal(again.best_params.matrices, result.best_params.matrices)
        assert np.array_equal(again.best_model.kraus, result.best_model.kraus)

    def test_windowed_best_is_monotone(self, renewal_run):
        _, config, result = renewal_run
        for trace in result.restart_traces:
            running = np.minimum.accumulate(trace)
            checkpoints = running[:: config.stall_window]
            assert np.all(np.diff(checkpoints) <= 0)

    def test_restart_permutation(self, renewal_run):
        data, config, result = renewal_run
        seeds = [config.seed_for_restart(r) for r in range(config.restarts)]
        permuted = TrainConfig(dim=2, seed=11, max_iters=60, restart_seeds=tuple(seeds[::-1]))
        other = train(data, permuted)
        assert other.restart_costs == result.restart_costs[::-1]
        assert other.final_cost == result.final_cost

    def test_stall_rule_stops_early(self):
        data = sample_sequence(uniform_renewal(2), 400, 0)
        result = train(data, TrainConfig(dim=2, restarts=1, delta_c_threshold=1e9))
        # nothing can improve by 1e9 bits, so it stops after one window
        assert result.iterations_used == [11]

    def test_all_restarts_diverge(self, monkeypatch):
        monkeypatch.setattr(trainer, "_costs", lambda thetas, *a, **k: np.full(len(thetas), np.inf))
        with pytest.raises(TrainingFailedError, match="diverged"):
            train([0, 1, 0], TrainConfig(dim=2, restarts=2))

    def test_rejects_bad_data(self):
        with pytest.raises(ValidationError):
            train([0, 3], TrainConfig(dim=1))
