"""Idle and recovery heuristics: operator-style macro-steps around agent actions.

While every line loading sits below the safety threshold the agent is not
consulted; the idle variant substitutes no-ops, the recovery variant walks
the topology back to the reference one substation at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .action_space import Action, NOOP
from .grid_model import Grid, TopologyState

SAFETY_THRESHOLD = 0.95


@dataclass(frozen=True)
class HeuristicConfig:
    mode: str = "idle"  # "off" | "idle" | "recovery"
    threshold: float = SAFETY_THRESHOLD

    def __post_init__(self):
        if self.mode not in ("off", "idle", "recovery"):
            raise ValueError(f"unknown heuristic mode {self.mode!r}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")


def idle_gate(max_rho: float, threshold: float = SAFETY_THRESHOLD) -> bool:
    """True when the agent must act; the boundary value counts as risk."""
    return max_rho >= threshold


def recovery_step(grid: Grid, topo: TopologyState, reference: TopologyState,
                  sub_cooldown: np.ndarray) -> Action:
    """One-substation restore action toward the reference topology.

    Picks the lowest-indexed substation whose busbar assignment differs; if
    that substation is still in cooldown the heuristic waits (no-op) instead
    of skipping ahead. Line statuses are the agent's concern, not the
    heuristic's.
    """
    for sub in grid.substations:
        positions = grid.sub_elements(sub.id)
        if all(topo.topo_vect[p] == reference.topo_vect[p] for p in positions):
            continue
        if sub_cooldown[sub.id] > 0:
            return NOOP
        return Action("split", sub_id=sub.id,
                      assignment=tuple(int(reference.topo_vect[p]) for p in positions))
    return NOOP


class HeuristicWrapper:
    """Accumulating macro-step wrapper around one environment instance.

    Each agent action triggers a run of heuristic-guided transitions that
    lasts while the grid stays safe; rewards and costs are summed
    undiscounted over the run.
    """

    def __init__(self, env, config: HeuristicConfig):
        if config.mode == "off":
            raise ValueError("wrap an environment only when a heuristic is enabled")
        self.env = env
        self.config = config
        self.reference = env.reference

    def reset(self, seed: int) -> np.ndarray:
        return self.env.reset(seed)

    def step(self, agent_action):
        return self.step_action(agent_action)

    def step_action(self, agent_action):
        result = self.env.step(agent_action)
        total_reward = result.reward
        total_lsi, total_tlo = result.costs
        n = 1
        while (not result.done
               and not idle_gate(self.env.last_max_rho, self.config.threshold)):
            if self.config.mode == "recovery":
                action = recovery_step(self.env.grid, self.env.state.topo,
                                       self.reference, self.env.state.sub_cooldown)
            else:
                action = NOOP
            result = self.env.step(action)
            total_reward += result.reward
            total_lsi += result.costs[0]
            total_tlo += result.costs[1]
            n += 1
        info = dict(result.info)
        info["n"] = n
        return type(result)(observation=result.observation, reward=total_reward,
                            costs=(total_lsi, total_tlo), done=result.done,
                            info=info)
