"""Reset/step/spec handles over gridbench environments.

The space descriptors come from the environment's own JSON handshake, so a
consumer never has to agree with gridbench about layout details out of band.
One handle is single-threaded; run several handles for parallel collection.
"""

from __future__ import annotations

import numpy as np

from gridbench.config import (build_action_space, build_chronics,
                              build_env_config, load_config, load_scenario)
from gridbench.engine import Environment
from gridbench.env_api import SpaceSpec
from gridbench.heuristics import HeuristicConfig, HeuristicWrapper


class EnvHandle:
    """One environment behind the standard reset/step surface.

    ``step`` mirrors the native result exactly: (observation, reward,
    (c_lsi, c_tlo), done, info). Stepping a finished episode raises, as does
    a malformed action, in both cases before any state changes.
    """

    def __init__(self, config_path=None, overrides: dict[str, str] | None = None):
        cfg = load_config(config_path, overrides)
        grid = load_scenario(cfg)
        chronics = build_chronics(cfg, grid)
        env_cfg = build_env_config(cfg, grid, chronics)
        self._env = Environment(env_cfg, action_space=build_action_space(cfg, grid))
        if cfg.heuristic == "off":
            self._stepper = self._env
        else:
            self._stepper = HeuristicWrapper(
                self._env, HeuristicConfig(mode=cfg.heuristic,
                                           threshold=cfg.threshold))
        self.spec = SpaceSpec.from_json(self._env.space_spec.to_json())

    @property
    def observation_length(self) -> int:
        return self.spec.length

    @property
    def n_actions(self) -> int:
        """Discrete action count; 0 for continuous tasks."""
        return self.spec.n_actions

    @property
    def action_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(low, high) for continuous tasks; empty arrays for discrete."""
        return np.array(self.spec.action_low), np.array(self.spec.action_high)

    def space_json(self) -> str:
        """The raw descriptor handshake, as emitted by the environment."""
        return self._env.space_spec.to_json()

    def reset(self, seed: int) -> np.ndarray:
        return np.asarray(self._stepper.reset(seed))

    def step(self, action):
        result = self._stepper.step(action)
        return (np.asarray(result.observation), result.reward, result.costs,
                result.done, result.info)

    @property
    def done(self) -> bool:
        state = self._env.state
        return state is None or state.done


def make(config_path=None, **overrides) -> EnvHandle:
    """Convenience constructor; keyword overrides use section_key naming
    with the first underscore separating section and key
    (e.g. run_seed=3, environment_episode_length=100)."""
    dotted = {k.replace("_", ".", 1): str(v) for k, v in overrides.items()}
    return EnvHandle(config_path, dotted or None)


class VectorHandle:
    """k independent environments stepped in lockstep.

    Observations stack to (k, obs_len); rewards, costs, and done flags stack
    likewise. Every environment must be live when step is called; consult
    ``dones`` and reset finished ones individually.
    """

    def __init__(self, handles: list[EnvHandle]):
        if not handles:
            raise ValueError("need at least one handle")
        lengths = {h.observation_length for h in handles}
        if len(lengths) != 1:
            raise ValueError(f"mismatched observation lengths: {sorted(lengths)}")
        self.handles = list(handles)

    @classmethod
    def from_config(cls, config_path, k: int,
                    overrides: dict[str, str] | None = None) -> "VectorHandle":
        return cls([EnvHandle(config_path, overrides) for _ in range(k)])

    def __len__(self) -> int:
        return len(self.handles)

    @property
    def dones(self) -> np.ndarray:
        return np.array([h.done for h in self.handles])

    def reset(self, seeds) -> np.ndarray:
        if len(seeds) != len(self.handles):
            raise ValueError(f"expected {len(self.handles)} seeds, got {len(seeds)}")
        return np.stack([h.reset(int(s)) for h, s in zip(self.handles, seeds)])

    def reset_one(self, i: int, seed: int) -> np.ndarray:
        return self.handles[i].reset(seed)

    def step(self, actions):
        if len(actions) != len(self.handles):
            raise ValueError(f"expected {len(self.handles)} actions, "
                             f"got {len(actions)}")
        obs, rewards, costs, dones, infos = [], [], [], [], []
        for h, a in zip(self.handles, actions):
            o, r, c, d, info = h.step(a)
            obs.append(o)
            rewards.append(r)
            costs.append(c)
            dones.append(d)
            infos.append(info)
        return (np.stack(obs), np.array(rewards), np.array(costs),
                np.array(dones), infos)
