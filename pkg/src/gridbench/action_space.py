"""Discrete topology actions: enumeration, survival-rate ranking, and
difficulty-leveled subsets; continuous action bound descriptors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid_model import (BusAssignChange, Grid, LineSetChange, TopologyChange,
                         bus_split_count, enumerate_bus_splits)

ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class Action:
    """A discrete topology action in canonical form."""

    kind: str  # "noop" | "line" | "split"
    line_id: int = -1
    sub_id: int = -1
    assignment: tuple[int, ...] = ()

    def encode(self) -> str:
        if self.kind == "noop":
            return "noop"
        if self.kind == "line":
            return f"line:{self.line_id}"
        return f"split:{self.sub_id}:" + "".join(str(b) for b in self.assignment)

    @staticmethod
    def decode(text: str) -> "Action":
        if text == "noop":
            return Action("noop")
        head, _, rest = text.partition(":")
        if head == "line":
            return Action("line", line_id=int(rest))
        if head == "split":
            sub, _, bits = rest.partition(":")
            return Action("split", sub_id=int(sub),
                          assignment=tuple(int(c) for c in bits))
        raise ValueError(f"unknown action encoding {text!r}")

    def sort_key(self):
        if self.kind == "noop":
            return (0, 0, ())
        if self.kind == "line":
            return (1, self.line_id, ())
        return (2, self.sub_id, self.assignment)

    def to_change(self, current_line_status: np.ndarray) -> TopologyChange | None:
        """Materialize as a topology change; line actions toggle status."""
        if self.kind == "noop":
            return None
        if self.kind == "line":
            return LineSetChange(self.line_id, not bool(current_line_status[self.line_id]))
        return BusAssignChange(self.sub_id, self.assignment)


NOOP = Action("noop")


@dataclass
class ActionCatalog:
    """Enumerated actions plus per-action survival statistics.

    ``survival[i]`` is NaN until action i has been sampled at least once.
    """

    actions: list[Action]
    survival: np.ndarray  # float, NaN = never sampled
    counts: np.ndarray  # int

    @classmethod
    def from_actions(cls, actions: list[Action]) -> "ActionCatalog":
        return cls(actions=list(actions),
                   survival=np.full(len(actions), np.nan),
                   counts=np.zeros(len(actions), dtype=int))

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class ContinuousBounds:
    """Per-dimension bounds of the continuous redispatch/curtail/storage space."""

    low: np.ndarray
    high: np.ndarray
    names: tuple[str, ...]

    @property
    def dimension(self) -> int:
        return len(self.names)


def continuous_bounds(grid: Grid) -> ContinuousBounds:
    low, high, names = [], [], []
    for g in grid.generators:
        if g.kind == "fossil":
            delta = min(g.ramp_up, g.ramp_down)
            low.append(-delta)
            high.append(delta)
            names.append(f"redispatch_{g.id}")
        else:
            low.append(0.0)
            high.append(1.0)
            names.append(f"curtail_{g.id}")
    for s in grid.storages:
        low.append(-s.p_charge_max)
        high.append(s.p_discharge_max)
        names.append(f"storage_{s.id}")
    return ContinuousBounds(np.array(low), np.array(high), tuple(names))


def enumerate_topology_actions(grid: Grid) -> ActionCatalog:
    """No-op, one status toggle per line, and every canonical bus split.

    Total size is 1 + n_lines + sum over substations of 2^(k-1) - 1.
    """
    actions: list[Action] = [NOOP]
    for line in grid.lines:
        actions.append(Action("line", line_id=line.id))
    for sub in grid.substations:
        k = len(grid.sub_elements(sub.id))
        for assignment in enumerate_bus_splits(k):
            actions.append(Action("split", sub_id=sub.id, assignment=assignment))
    expected = 1 + grid.n_lines + sum(bus_split_count(len(grid.sub_elements(s.id)))
                                      for s in grid.substations)
    assert len(actions) == expected
    return ActionCatalog.from_actions(actions)


def rank_actions(env_config, catalog: ActionCatalog, budget: int, seed: int,
                 episode_steps: int = 2016) -> ActionCatalog:
    """Estimate per-action survival and sort the catalog by it.

    Protocol: ``budget`` episodes are simulated; each episode uniformly picks
    one action and replays it as a fixed policy under the idle heuristic.
    Survival is steps survived over ``episode_steps``. The result is sorted
    by descending mean survival, ties broken by canonical action order, and
    never-sampled actions rank below every sampled one.
    """
    from .engine import Environment  # local import: engine depends on this module
    from .heuristics import HeuristicConfig, HeuristicWrapper

    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")

    order = sorted(range(len(catalog.actions)), key=lambda i: catalog.actions[i].sort_key())
    actions = [catalog.actions[i] for i in order]

    totals = np.zeros(len(actions))
    counts = np.zeros(len(actions), dtype=int)
    rng = np.random.default_rng(seed)
    cfg = replace(env_config, episode_length=episode_steps)
    env = Environment(cfg, action_space=None)
    for _ in range(budget):
        idx = int(rng.integers(len(actions)))
        episode_seed = int(rng.integers(2**31 - 1))
        wrapper = HeuristicWrapper(env, HeuristicConfig(mode="idle"))
        wrapper.reset(seed=episode_seed)
        steps = 0
        done = False
        while not done and steps < episode_steps:
            result = wrapper.step_action(actions[idx])
            steps = env.state.t
            done = result.done and not result.info.get("truncated", False)
        totals[idx] += min(steps, episode_steps) / episode_steps
        counts[idx] += 1

    survival = np.where(counts > 0, totals / np.maximum(counts, 1), np.nan)
    rank = sorted(range(len(actions)),
                  key=lambda i: (counts[i] == 0,
                                 -survival[i] if counts[i] > 0 else 0.0,
                                 i))
    return ActionCatalog(actions=[actions[i] for i in rank],
                         survival=survival[rank],
                         counts=counts[rank])


def build_difficulty_level(ranked: ActionCatalog, level: int, grid: Grid) -> list[Action]:
    """Top-N slice of the ranking for the scenario's difficulty table.

    The no-op is always part of the space; if it fell outside the top N, it
    replaces the last slot so the advertised size is exact.
    """
    if not grid.difficulty_levels:
        raise ValueError(f"scenario {grid.name!r} declares no difficulty levels")
    if not 0 <= level < len(grid.difficulty_levels):
        raise ValueError(f"level {level} out of range for {grid.name!r} "
                         f"(has {len(grid.difficulty_levels)} levels)")
    n = grid.difficulty_levels[level]
    top = list(ranked.actions[:n])
    if NOOP not in top:
        top = [NOOP] + top[:n - 1]
    else:
        top.remove(NOOP)
        top = [NOOP] + top
    return top


def save_ranking(catalog: ActionCatalog, path, meta: dict | None = None) -> None:
    entries = []
    for i, a in enumerate(catalog.actions):
        s = catalog.survival[i]
        entries.append({"action": a.encode(),
                        "survival": None if np.isnan(s) else float(s),
                        "count": int(catalog.counts[i])})
    doc = {"version": ARTIFACT_VERSION, "meta": meta or {}, "entries": entries}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ranking(path) -> ActionCatalog:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != ARTIFACT_VERSION:
        raise ValueError(f"unsupported ranking artifact version {doc.get('version')}")
    actions, survival, counts = [], [], []
    for e in doc["entries"]:
        actions.append(Action.decode(e["action"]))
        survival.append(np.nan if e["survival"] is None else e["survival"])
        counts.append(e["count"])
    return ActionCatalog(actions=actions,
                         survival=np.array(survival, dtype=float),
                         counts=np.array(counts, dtype=int))
