"""Baseline policies, linear Q-learning against a value-iteration oracle,
and the Lagrangian multiplier mechanics."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridbench.agents import (EpsilonSchedule, FeatureStandardizer,
                              LagrangianState, LinearQAgent, act_greedy,
                              act_idle, act_random, lagrangian_update,
                              q_update)

GAMMA = 0.9


class ChainMDP:
    """Two non-terminal states; advancing from state 1 pays 1 and ends.

    Deterministic, so Q-learning with one-hot features must converge to the
    value-iteration fixed point exactly.
    """

    n_states = 2
    n_actions = 2

    def step(self, s: int, a: int):
        if s == 0:
            return (0, 0.0, False) if a == 0 else (1, 0.0, False)
        return (0, 0.0, False) if a == 0 else (-1, 1.0, True)

    def q_oracle(self) -> np.ndarray:
        q = np.zeros((self.n_states, self.n_actions))
        for _ in range(500):
            new = np.zeros_like(q)
            for s in range(self.n_states):
                for a in range(self.n_actions):
                    ns, r, done = self.step(s, a)
                    new[s, a] = r + (0.0 if done else GAMMA * np.max(q[ns]))
            if np.max(np.abs(new - q)) < 1e-14:
                q = new
                break
            q = new
        return q


def one_hot(s: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[s] = 1.0
    return v


def test_chain_oracle_values():
    # [DERIVED] hand-solved fixed point: Q(1,1)=1, Q(0,1)=0.9, stays=0.81
    q = ChainMDP().q_oracle()
    assert q[1, 1] == pytest.approx(1.0)
    assert q[0, 1] == pytest.approx(GAMMA)
    assert q[0, 0] == pytest.approx(GAMMA ** 2)
    assert q[1, 0] == pytest.approx(GAMMA ** 2)


def test_linear_q_converges_to_oracle():
    mdp = ChainMDP()
    agent = LinearQAgent(weights=np.zeros((2, 2)), learning_rate=0.5,
                         gamma=GAMMA, standardizer=None)
    rng = np.random.default_rng(0)
    for _ in range(2000):
        s = int(rng.integers(2))
        done = False
        while not done:
            a = int(rng.integers(2))
            ns, r, done = mdp.step(s, a)
            feats = one_hot(s, 2)
            next_feats = one_hot(max(ns, 0), 2)
            q_update(agent, feats, a, r, next_feats, done)
            s = ns
    assert np.max(np.abs(agent.weights - mdp.q_oracle().T)) < 1e-3
    # one-hot features make weights the tabular Q: w[a, s] = Q(s, a)
    assert np.max(np.abs(agent.weights[1, 1] - 1.0)) < 1e-3


def test_q_update_single_step_math():
    agent = LinearQAgent(weights=np.zeros((2, 3)), learning_rate=0.1,
                         gamma=0.5, standardizer=None)
    feats = np.array([1.0, 2.0, 0.0])
    nxt = np.array([0.0, 1.0, 1.0])
    q_update(agent, feats, action=1, reward=2.0, next_features=nxt, done=False)
    # target = 2 + 0.5 * 0 = 2, td = 2 - 0 = 2, w1 += 0.1 * 2 * feats
    assert np.allclose(agent.weights[1], 0.2 * feats)
    assert np.all(agent.weights[0] == 0.0)


def test_q_update_rejects_dimension_mismatch():
    agent = LinearQAgent(weights=np.zeros((2, 3)), standardizer=None)
    with pytest.raises(ValueError, match="dimension"):
        q_update(agent, np.zeros(4), 0, 0.0, np.zeros(4), True)


def test_standardizer_matches_batch_statistics():
    rng = np.random.default_rng(3)
    xs = rng.normal(5.0, 2.0, size=(200, 4))
    std = FeatureStandardizer.for_dim(4)
    for x in xs:
        std.update(x)
    assert np.allclose(std.mean, xs.mean(axis=0))
    sample_std = xs.std(axis=0, ddof=1)
    z = std.transform(xs[0])
    assert np.allclose(z, (xs[0] - xs.mean(axis=0)) / sample_std)


def test_standardizer_degenerate_cases():
    std = FeatureStandardizer.for_dim(2)
    x = np.array([1.0, 2.0])
    assert np.allclose(std.transform(x), x)  # no data yet
    std.update(x)
    std.update(x)  # zero variance guarded by the 1e-8 floor
    assert np.all(np.isfinite(std.transform(x)))


def test_epsilon_schedule_linear_decay():
    sched = EpsilonSchedule(initial=1.0, final=0.1, decay_fraction=0.5)
    assert sched.value(0, 100) == 1.0
    assert sched.value(25, 100) == pytest.approx(0.55)
    assert sched.value(50, 100) == pytest.approx(0.1)
    assert sched.value(99, 100) == pytest.approx(0.1)


def test_agent_save_load_round_trip(tmp_path):
    agent = LinearQAgent.create(n_actions=3, n_features=4, learning_rate=0.2)
    agent.weights[:] = np.arange(12.0).reshape(3, 4)
    agent.standardizer.update(np.array([1.0, 2.0, 3.0, 4.0]))
    p = tmp_path / "w.npz"
    agent.save(p)
    back = LinearQAgent.load(p)
    assert np.array_equal(back.weights, agent.weights)
    assert back.learning_rate == 0.2
    assert back.standardizer.count == 1
    assert np.array_equal(back.standardizer.mean, agent.standardizer.mean)


def test_act_epsilon_extremes():
    agent = LinearQAgent(weights=np.array([[0.0], [5.0], [1.0]]),
                         standardizer=None)
    rng = np.random.default_rng(0)
    feats = np.ones(1)
    assert agent.act(feats, epsilon=0.0, rng=rng) == 1
    picks = {agent.act(feats, epsilon=1.0, rng=rng) for _ in range(100)}
    assert picks == {0, 1, 2}


def test_idle_and_random():
    assert act_idle() == 0
    rng = np.random.default_rng(0)
    draws = [act_random(5, rng) for _ in range(200)]
    assert set(draws) == {0, 1, 2, 3, 4}


def test_greedy_keeps_noop_without_strict_improvement(env):
    env.reset(seed=1)
    # under calm conditions no action strictly beats the no-op's loading by
    # more than the tolerance in a way that ranks below index 0 twice
    choice = act_greedy(env, env.action_space[:1])
    assert choice == 0


def test_greedy_picks_strict_improvement(env):
    from gridbench.action_space import Action, NOOP
    env.reset(seed=1)
    env.step(Action("line", line_id=9))  # noticeable loading shift
    for _ in range(3):
        env.step(0)  # let the cooldown expire
    reconnect = Action("line", line_id=9)
    noop_rho, _ = env.simulate(NOOP)
    fix_rho, _ = env.simulate(reconnect)
    if fix_rho < noop_rho - 1e-9:
        assert act_greedy(env, [NOOP, reconnect]) == 1


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=50))
def test_lagrangian_never_negative(costs):
    state = LagrangianState(lambdas=np.zeros(1), taus=np.array([10.0]),
                            learning_rate=0.1)
    for c in costs:
        state = lagrangian_update(state, np.array([c]))
        assert state.lambdas[0] >= 0.0


def test_lagrangian_increases_while_violating():
    state = LagrangianState(lambdas=np.zeros(1), taus=np.array([5.0]),
                            learning_rate=0.1)
    prev = 0.0
    for _ in range(10):
        state = lagrangian_update(state, np.array([8.0]))
        assert state.lambdas[0] > prev
        prev = state.lambdas[0]


def test_lagrangian_decays_toward_zero_when_satisfied():
    state = LagrangianState(lambdas=np.array([2.0]), taus=np.array([5.0]),
                            learning_rate=0.1)
    prev = 2.0
    for _ in range(100):
        state = lagrangian_update(state, np.array([1.0]))
        assert state.lambdas[0] <= prev
        prev = state.lambdas[0]
    assert prev == 0.0


def test_lagrangian_penalized_reward():
    state = LagrangianState(lambdas=np.array([0.5, 2.0]),
                            taus=np.array([0.0, 50.0]))
    got = state.penalized_reward(1.0, np.array([2.0, 1.0]))
    assert got == pytest.approx(1.0 - (0.5 * 2.0 + 2.0 * 1.0))


def test_lagrangian_rejects_negative_init():
    with pytest.raises(ValueError, match="non-negative"):
        LagrangianState(lambdas=np.array([-1.0]), taus=np.array([0.0]))
