"""Observation construction and the published space descriptor.

The observation is a fixed concatenation of named blocks; which blocks appear
is a pure function of the grid, the task kind, and the feature flags. The
descriptor (length, named slices, action space shape) serializes to JSON for
out-of-process consumers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .chronics import STEPS_PER_DAY, STEP_MINUTES
from .grid_model import Grid


@dataclass(frozen=True)
class SpaceSpec:
    """Observation layout plus the action-space shape for one environment."""

    length: int
    slices: tuple[tuple[str, int, int], ...]  # (name, start, stop)
    task: str
    n_actions: int  # 0 for continuous tasks
    action_low: tuple[float, ...]  # empty for discrete tasks
    action_high: tuple[float, ...]

    def slice_of(self, name: str) -> slice:
        for n, a, b in self.slices:
            if n == name:
                return slice(a, b)
        raise KeyError(name)

    def block_names(self) -> list[str]:
        return [n for n, _, _ in self.slices]

    def to_json(self) -> str:
        return json.dumps({
            "length": self.length,
            "slices": [[n, a, b] for n, a, b in self.slices],
            "task": self.task,
            "n_actions": self.n_actions,
            "action_low": list(self.action_low),
            "action_high": list(self.action_high),
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SpaceSpec":
        doc = json.loads(text)
        return SpaceSpec(length=doc["length"],
                         slices=tuple((n, a, b) for n, a, b in doc["slices"]),
                         task=doc["task"], n_actions=doc["n_actions"],
                         action_low=tuple(doc["action_low"]),
                         action_high=tuple(doc["action_high"]))


def block_layout(grid: Grid, task: str, include_maintenance: bool,
                 time_encoding: str) -> list[tuple[str, int]]:
    """Ordered (block name, length) pairs for the observation vector."""
    n_time = 6 if time_encoding == "cyclic" else 1
    blocks = [
        ("time", n_time),
        ("gen_p", grid.n_gens),
        ("gen_theta", grid.n_gens),
        ("load_p", grid.n_loads),
        ("load_theta", grid.n_loads),
        ("rho", grid.n_lines),
        ("cooldown_lines", grid.n_lines),
    ]
    if task == "topology":
        blocks += [
            ("topo_vect", grid.topo_size),
            ("line_status", grid.n_lines),
            ("time_overflow", grid.n_lines),
            ("sub_cooldown", grid.n_subs),
        ]
    else:
        blocks += [
            ("tg_dispatch", grid.n_gens),
            ("curr_dispatch", grid.n_gens),
            ("gen_margin_up", grid.n_gens),
            ("gen_margin_down", grid.n_gens),
            ("gen_p_curt", grid.n_gens),
            ("curtail", grid.n_gens),
            ("curtail_limit", grid.n_gens),
        ]
    if include_maintenance:
        blocks += [
            ("time_next_maint", grid.n_lines),
            ("duration_next_maint", grid.n_lines),
        ]
    if grid.n_storages:
        blocks += [
            ("storage_charge", grid.n_storages),
            ("storage_power_tg", grid.n_storages),
            ("storage_power", grid.n_storages),
            ("storage_theta", grid.n_storages),
        ]
    return blocks


def build_spec(grid: Grid, task: str, n_actions: int, bounds,
               include_maintenance: bool, time_encoding: str) -> SpaceSpec:
    blocks = block_layout(grid, task, include_maintenance, time_encoding)
    slices = []
    pos = 0
    for name, length in blocks:
        slices.append((name, pos, pos + length))
        pos += length
    if bounds is None:
        low: tuple[float, ...] = ()
        high: tuple[float, ...] = ()
    else:
        low = tuple(float(x) for x in bounds.low)
        high = tuple(float(x) for x in bounds.high)
    return SpaceSpec(length=pos, slices=tuple(slices), task=task,
                     n_actions=n_actions, action_low=low, action_high=high)


def _time_features(abs_step: int, encoding: str) -> np.ndarray:
    if encoding == "scalar":
        return np.array([float(abs_step)])
    minutes = abs_step * STEP_MINUTES
    minute_of_hour = minutes % 60
    hour_of_day = (minutes // 60) % 24
    day_of_week = (abs_step // STEPS_PER_DAY) % 7
    out = np.empty(6)
    out[0] = np.sin(2 * np.pi * minute_of_hour / 60)
    out[1] = np.cos(2 * np.pi * minute_of_hour / 60)
    out[2] = np.sin(2 * np.pi * hour_of_day / 24)
    out[3] = np.cos(2 * np.pi * hour_of_day / 24)
    out[4] = np.sin(2 * np.pi * day_of_week / 7)
    out[5] = np.cos(2 * np.pi * day_of_week / 7)
    return out


def _theta_at(theta: np.ndarray, node: int) -> float:
    v = theta[node]
    return float(v) if np.isfinite(v) else 0.0


def observe(env, state, sol, row: int) -> np.ndarray:
    """Assemble the observation vector for the environment's space spec."""
    from .power_flow import injection_nodes  # pure helper, no cycle

    grid: Grid = env.grid
    spec: SpaceSpec = env.space_spec
    nodes = injection_nodes(grid, state.topo)
    chron = env.chronics
    values: dict[str, np.ndarray] = {}

    values["time"] = _time_features(row, env.config.time_encoding)
    values["gen_p"] = state.dispatch.copy()
    values["gen_theta"] = np.array([_theta_at(sol.theta, int(nodes["gen"][g.id]))
                                    for g in grid.generators])
    values["load_p"] = chron.demand[row].copy()
    values["load_theta"] = np.array([_theta_at(sol.theta, int(nodes["load"][l.id]))
                                     for l in grid.loads])
    values["rho"] = sol.rho.copy()
    values["cooldown_lines"] = state.line_cooldown.astype(float)

    if spec.task == "topology":
        values["topo_vect"] = state.topo.topo_vect.astype(float)
        values["line_status"] = state.topo.line_status.astype(float)
        values["time_overflow"] = state.overload_counter.astype(float)
        values["sub_cooldown"] = state.sub_cooldown.astype(float)
    else:
        fossil_ids = grid.fossil_ids()
        ren_ids = grid.renewable_ids()
        sched = np.zeros(grid.n_gens)
        for k, gid in enumerate(fossil_ids):
            sched[gid] = chron.dispatch[row, k]
        avail = np.zeros(grid.n_gens)
        for j, gid in enumerate(ren_ids):
            avail[gid] = chron.renewable[row, j]
        values["tg_dispatch"] = state.target_dispatch.copy()
        values["curr_dispatch"] = state.dispatch.copy()
        values["gen_margin_up"] = np.array(
            [min(g.ramp_up, g.p_max - state.dispatch[g.id]) for g in grid.generators])
        values["gen_margin_down"] = np.array(
            [min(g.ramp_down, state.dispatch[g.id] - g.p_min) for g in grid.generators])
        values["gen_p_curt"] = np.maximum(avail - state.dispatch, 0.0) \
            * np.array([1.0 if g.kind == "renewable" else 0.0 for g in grid.generators])
        values["curtail"] = np.array(
            [state.dispatch[g.id] / g.p_max if g.kind == "renewable" and g.p_max > 0
             else 0.0 for g in grid.generators])
        values["curtail_limit"] = state.curtail_limit.copy()

    if "time_next_maint" in spec.block_names():
        nxt = np.full(grid.n_lines, -1.0)
        dur = np.zeros(grid.n_lines)
        for ev in chron.maintenance:
            if ev.start + ev.duration <= row:
                continue
            delta = max(ev.start - row, 0)
            if nxt[ev.line_id] < 0 or delta < nxt[ev.line_id]:
                nxt[ev.line_id] = float(delta)
                dur[ev.line_id] = float(ev.duration)
        values["time_next_maint"] = nxt
        values["duration_next_maint"] = dur

    if grid.n_storages:
        values["storage_charge"] = state.storage_charge.copy()
        values["storage_power_tg"] = state.storage_target.copy()
        values["storage_power"] = state.storage_power.copy()
        values["storage_theta"] = np.array(
            [_theta_at(sol.theta, int(nodes["storage"][j]))
             for j in range(grid.n_storages)])

    out = np.empty(spec.length)
    for name, a, b in spec.slices:
        block = np.asarray(values[name], dtype=float)
        if block.shape != (b - a,):
            raise AssertionError(f"block {name} has length {block.shape}, "
                                 f"expected {b - a}")
        out[a:b] = block
    return out
