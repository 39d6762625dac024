"""Reward terms, constraint costs, and per-step analysis metrics.

The step reward is R = alpha * survive + beta * overload + eta * cost.
Overload penalizes loadings above limit and disconnected lines, and pays a
free-capacity bonus when the whole grid is nominal; cost penalizes losses,
redispatch deviations, and storage activity at the marginal price.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 1.0
    beta: float = 0.5
    eta: float = 0.5
    epsilon: float = 1e-6  # overload denominator guard
    cost_scale: float = 10000.0
    episode_length: int = 8064


@dataclass
class CostAccumulator:
    """Running episode totals for the two constraint costs."""

    tau_lsi: float = 0.0
    tau_tlo: float = 50.0
    total_lsi: int = 0
    total_tlo: int = 0

    def add(self, c_lsi: int, c_tlo: int) -> None:
        self.total_lsi += c_lsi
        self.total_tlo += c_tlo

    def reset(self) -> None:
        self.total_lsi = 0
        self.total_tlo = 0


def reward_survive(episode_length: int) -> float:
    """Per-step survival reward; sums to 1 over a fully survived episode."""
    if episode_length < 1:
        raise ValueError("episode length must be >= 1")
    return 1.0 / episode_length


def reward_overload(flows_abs: np.ndarray, limits: np.ndarray,
                    line_status: np.ndarray, epsilon: float) -> float:
    """Overload/disconnection penalty with a free-capacity bonus, in [-1, 1].

    Per line: max(0, (|flow| - limit) / (limit + eps)) plus an indicator for
    disconnection, summed, negated, and divided by the line count. When no
    line is overloaded and all are connected, the value is instead the mean
    unused-capacity fraction (in [0, 1]).
    """
    n = len(limits)
    penalty = 0.0
    any_overload = False
    for i in range(n):
        if not line_status[i]:
            penalty += 1.0
            continue
        over = (flows_abs[i] - limits[i]) / (limits[i] + epsilon)
        if over > 0.0:
            penalty += over
            any_overload = True
    if penalty == 0.0 and not any_overload:
        bonus = 0.0
        for i in range(n):
            rho = flows_abs[i] / limits[i]
            slack = 1.0 - rho
            if slack > 0.0:
                bonus += slack
        return min(bonus / n, 1.0)
    return max(-penalty / n, -1.0)


def reward_overload_from_rho(rho: np.ndarray, limits: np.ndarray,
                             line_status: np.ndarray, epsilon: float) -> float:
    """Same value as :func:`reward_overload` computed from logged loadings."""
    flows_abs = np.array([rho[i] * limits[i] for i in range(len(limits))])
    return reward_overload(flows_abs, limits, line_status, epsilon)


def reward_cost(p_gen: float, p_demand: float, redisp_abs: float,
                storage_abs: float, c_marginal: float, scale: float) -> float:
    """Economic penalty in [-1, 0]: losses + redispatch + storage activity,
    priced at the marginal cost of the most expensive running generator."""
    raw = -((p_gen - p_demand) + redisp_abs + storage_abs) * c_marginal
    return min(max(raw / scale, -1.0), 0.0)


def cost_lsi(p_gen: float, p_demand: float, n_islands: int) -> int:
    """Load-shedding/islanding cost: shortfall indicator + islanding indicator."""
    l_t = 1 if p_gen < p_demand else 0
    i_t = 1 if n_islands > 0 else 0
    return l_t + i_t


def cost_tlo(rho: np.ndarray, line_status: np.ndarray,
             exempt_disconnection: np.ndarray) -> int:
    """Overloaded-line count plus disconnections not caused by maintenance
    or the opponent."""
    count = 0
    for i in range(len(rho)):
        if line_status[i]:
            if rho[i] > 1.0:
                count += 1
        elif not exempt_disconnection[i]:
            count += 1
    return count


def total_reward(cfg: RewardConfig, r_overload: float, r_cost: float) -> float:
    return cfg.alpha * reward_survive(cfg.episode_length) \
        + cfg.beta * r_overload + cfg.eta * r_cost


def metrics_snapshot(flows_abs: np.ndarray, limits: np.ndarray,
                     line_status: np.ndarray, hamming_to_reference: int,
                     epsilon: float) -> tuple[float, float, float]:
    """(margin, overload score, topology score) for the analysis report.

    Margin sums per-line unused capacity in MW, with -1 for each disconnected
    line; the topology score is minus the Hamming distance to the reference.
    """
    margin = 0.0
    for i in range(len(limits)):
        if line_status[i]:
            margin += max(0.0, limits[i] - flows_abs[i])
        else:
            margin += -1.0
    overload_score = reward_overload(flows_abs, limits, line_status, epsilon)
    return margin, overload_score, float(-hamming_to_reference)
