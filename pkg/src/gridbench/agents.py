"""Baseline policies: idle, random, one-step lookahead experts, linear
Q-learning with epsilon-greedy exploration, and a Lagrangian constraint
wrapper state."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

LOOKAHEAD_TOL = 1e-9


def act_idle() -> int:
    """The no-op baseline."""
    return 0


def act_random(n_actions: int, rng: np.random.Generator) -> int:
    return int(rng.integers(n_actions))


def act_greedy(env, action_space) -> int:
    """One-step lookahead minimizing the next-step maximum line loading.

    The no-op is evaluated first and kept unless some action strictly
    improves the worst loading; ties go to the lowest action index.
    """
    best_idx = 0
    best_score, _ = env.simulate(action_space[0])
    for idx in range(1, len(action_space)):
        score, _ = env.simulate(action_space[idx])
        if score < best_score - LOOKAHEAD_TOL:
            best_idx = idx
            best_score = score
    return best_idx


def act_dc_optim(env, action_space) -> int:
    """One-step lookahead minimizing the sum of squared overload excesses
    under the DC solve; contract otherwise identical to act_greedy."""
    def objective(action) -> float:
        record = env.simulate_record(action)
        if record.infeasible:
            return float("inf")
        return float(np.sum(np.maximum(record.rho - 1.0, 0.0) ** 2))

    best_idx = 0
    best_score = objective(action_space[0])
    for idx in range(1, len(action_space)):
        score = objective(action_space[idx])
        if score < best_score - LOOKAHEAD_TOL:
            best_idx = idx
            best_score = score
    return best_idx


@dataclass
class FeatureStandardizer:
    """Running mean/variance standardization (Welford)."""

    mean: np.ndarray
    m2: np.ndarray
    count: int = 0

    @classmethod
    def for_dim(cls, dim: int) -> "FeatureStandardizer":
        return cls(mean=np.zeros(dim), m2=np.zeros(dim))

    def update(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return x - self.mean
        std = np.sqrt(self.m2 / (self.count - 1))
        return (x - self.mean) / np.maximum(std, 1e-8)


@dataclass
class EpsilonSchedule:
    initial: float = 1.0
    final: float = 0.05
    decay_fraction: float = 0.5  # fraction of total steps spent decaying

    def value(self, step: int, total_steps: int) -> float:
        horizon = max(1, int(self.decay_fraction * total_steps))
        frac = min(step / horizon, 1.0)
        return self.initial + (self.final - self.initial) * frac


@dataclass
class LinearQAgent:
    """Q(s, a) = w_a . phi(s) with epsilon-greedy exploration."""

    weights: np.ndarray  # (n_actions, n_features)
    learning_rate: float = 0.01
    gamma: float = 0.9
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    standardizer: FeatureStandardizer | None = None

    @classmethod
    def create(cls, n_actions: int, n_features: int, **kw) -> "LinearQAgent":
        return cls(weights=np.zeros((n_actions, n_features)),
                   standardizer=FeatureStandardizer.for_dim(n_features), **kw)

    def features(self, observation: np.ndarray, update_stats: bool = False) -> np.ndarray:
        if self.standardizer is None:
            return observation
        if update_stats:
            self.standardizer.update(observation)
        return self.standardizer.transform(observation)

    def q_values(self, features: np.ndarray) -> np.ndarray:
        return self.weights @ features

    def act(self, features: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        if rng.random() < epsilon:
            return int(rng.integers(self.weights.shape[0]))
        return int(np.argmax(self.q_values(features)))

    def save(self, path) -> None:
        np.savez(path, version=1, weights=self.weights,
                 mean=self.standardizer.mean if self.standardizer is not None else np.zeros(0),
                 m2=self.standardizer.m2 if self.standardizer is not None else np.zeros(0),
                 count=self.standardizer.count if self.standardizer is not None else 0,
                 learning_rate=self.learning_rate, gamma=self.gamma)

    @classmethod
    def load(cls, path) -> "LinearQAgent":
        data = np.load(path)
        if int(data["version"]) != 1:
            raise ValueError(f"unsupported weights file version {data['version']}")
        agent = cls(weights=data["weights"],
                    learning_rate=float(data["learning_rate"]),
                    gamma=float(data["gamma"]))
        if data["mean"].size:
            agent.standardizer = FeatureStandardizer(
                mean=data["mean"], m2=data["m2"], count=int(data["count"]))
        return agent


def q_update(agent: LinearQAgent, features: np.ndarray, action: int,
             reward: float, next_features: np.ndarray, done: bool) -> None:
    """Semi-gradient TD(0) update on one transition, in place."""
    if features.shape[0] != agent.weights.shape[1]:
        raise ValueError(f"feature dimension {features.shape[0]} does not match "
                         f"weights {agent.weights.shape}")
    q_sa = float(agent.weights[action] @ features)
    bootstrap = 0.0 if done else float(np.max(agent.weights @ next_features))
    target = reward + agent.gamma * bootstrap
    agent.weights[action] += agent.learning_rate * (target - q_sa) * features


@dataclass(frozen=True)
class LagrangianState:
    """Non-negative multipliers for episode-level cost constraints."""

    lambdas: np.ndarray
    taus: np.ndarray
    learning_rate: float = 0.01

    def __post_init__(self):
        if np.any(self.lambdas < 0):
            raise ValueError("multipliers must be non-negative")

    def penalized_reward(self, reward: float, costs: np.ndarray) -> float:
        return reward - float(self.lambdas @ costs)


def lagrangian_update(state: LagrangianState, episode_costs: np.ndarray) -> LagrangianState:
    """Projected dual ascent: lambda_i <- max(0, lambda_i + lr*(cost_i - tau_i))."""
    new = state.lambdas + state.learning_rate * (np.asarray(episode_costs, dtype=float)
                                                 - state.taus)
    return replace(state, lambdas=np.maximum(new, 0.0))
