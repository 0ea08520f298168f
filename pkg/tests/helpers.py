"""Shared instance generators for the test suite."""

from __future__ import annotations

import numpy as np

from riskdp import CostDistribution, FiniteModel, MarkovPolicy


def flip_model() -> FiniteModel:
    """One-stage instance where risk aversion flips the optimal action.

    From s0, action a reaches a zero-cost state w.p. 0.9 and a cost-10 state
    w.p. 0.1 (expected cost 1); action b reaches a cost-2 state surely. The
    expectation favors a, while strong risk aversion favors b.
    """
    dynamics = np.zeros((1, 4, 2, 2), dtype=np.int64)
    dynamics[0, 0, 0] = [1, 2]
    dynamics[0, 0, 1] = [3, 3]
    for x in range(1, 4):
        dynamics[0, x, :, :] = x
    kernel = np.zeros((1, 4, 2, 2))
    kernel[:, :, :, 0] = 1.0
    kernel[0, 0, 0] = [0.9, 0.1]
    stage_cost = np.zeros((1, 4, 2))
    terminal = np.array([0.0, 0.0, 10.0, 2.0])
    return FiniteModel(
        horizon=1,
        dynamics=dynamics,
        kernel=kernel,
        stage_cost=stage_cost,
        terminal_cost=terminal,
        states=("s0", "s1", "s2", "s3"),
        actions=("a", "b"),
        disturbances=("w0", "w1"),
    )


def policy_const(m: FiniteModel, action: int) -> MarkovPolicy:
    return MarkovPolicy(np.full((m.horizon, m.n_states), action, dtype=np.int64))


def random_model(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    n_disturbances: int,
    horizon: int,
    cost_lo: float = 0.0,
    cost_hi: float = 10.0,
    sparse_noise: bool = False,
) -> FiniteModel:
    """Random valid instance with uniform costs and normalized kernel rows."""
    dynamics = rng.integers(0, n_states, size=(horizon, n_states, n_actions, n_disturbances))
    raw = rng.random((horizon, n_states, n_actions, n_disturbances)) + 0.05
    if sparse_noise and n_disturbances > 1:
        mask = rng.random(raw.shape) < 0.3
        # keep at least the first atom of every row
        mask[..., 0] = False
        raw = np.where(mask, 0.0, raw)
    kernel = raw / raw.sum(axis=-1, keepdims=True)
    stage_cost = rng.uniform(cost_lo, cost_hi, size=(horizon, n_states, n_actions))
    terminal = rng.uniform(cost_lo, cost_hi, size=n_states)
    return FiniteModel(
        horizon=horizon,
        dynamics=dynamics,
        kernel=kernel,
        stage_cost=stage_cost,
        terminal_cost=terminal,
    )


def random_sized_model(
    rng: np.random.Generator,
    max_states: int = 3,
    max_actions: int = 2,
    max_disturbances: int = 3,
    max_horizon: int = 3,
    **kwargs,
) -> FiniteModel:
    return random_model(
        rng,
        n_states=int(rng.integers(1, max_states + 1)),
        n_actions=int(rng.integers(1, max_actions + 1)),
        n_disturbances=int(rng.integers(1, max_disturbances + 1)),
        horizon=int(rng.integers(1, max_horizon + 1)),
        **kwargs,
    )


def random_policy(rng: np.random.Generator, m: FiniteModel) -> MarkovPolicy:
    return MarkovPolicy(rng.integers(0, m.n_actions, size=(m.horizon, m.n_states)))


def random_distribution(
    rng: np.random.Generator,
    max_atoms: int = 10,
    value_lo: float = -10.0,
    value_hi: float = 50.0,
) -> CostDistribution:
    n = int(rng.integers(1, max_atoms + 1))
    values = rng.uniform(value_lo, value_hi, size=n)
    probs = rng.random(n) + 0.02
    probs = probs / probs.sum()
    return CostDistribution(tuple(zip(values.tolist(), probs.tolist())))
