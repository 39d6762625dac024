"""Episodic transition engine: opponent events, agent actions, cooldowns,
maintenance, continuous dynamics, slack balancing, DC solve, overload
processing, and reward/cost emission."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import env_api
from .action_space import Action, ActionCatalog, NOOP, continuous_bounds, enumerate_topology_actions
from .chronics import Chronics, EPISODE_STEPS, STEP_MINUTES, sample_episode_start
from .grid_model import (FOSSIL, Grid, TopologyState, apply_topology,
                         hamming_distance, reference_topology)
from .power_flow import (FlowSolution, detect_islands, injection_nodes,
                         solve_dc)
from .rewards import (RewardConfig, cost_tlo, metrics_snapshot, reward_cost,
                      reward_overload_from_rho, total_reward)

STEP_HOURS = STEP_MINUTES / 60.0

# line disconnection causes
CAUSE_NONE = 0
CAUSE_AGENT = 1
CAUSE_OPPONENT = 2
CAUSE_MAINTENANCE = 3
CAUSE_OVERLOAD = 4

EXEMPT_CAUSES = (CAUSE_OPPONENT, CAUSE_MAINTENANCE)

OVERLOAD_GRACE_STEPS = 3  # disconnection triggers on the 4th consecutive step


class ActionError(ValueError):
    """Malformed action encoding, rejected before any state mutation."""


@dataclass(frozen=True)
class EnvConfig:
    grid: Grid
    chronics: Chronics
    task: str = "topology"  # "topology" | "redispatch"
    episode_length: int = EPISODE_STEPS
    reward: RewardConfig = field(default_factory=RewardConfig)
    opponent_enabled: bool = False
    opponent_prob: float = 1.0 / 2016.0
    switch_cooldown: int = 3
    forced_cooldown: int = 12
    shortfall_tol: float = 1e-6
    time_encoding: str = "cyclic"  # "cyclic" | "scalar"

    def __post_init__(self):
        if self.task not in ("topology", "redispatch"):
            raise ValueError(f"unknown task kind {self.task!r}")
        if self.reward.episode_length != self.episode_length:
            object.__setattr__(self, "reward",
                               RewardConfig(alpha=self.reward.alpha,
                                            beta=self.reward.beta,
                                            eta=self.reward.eta,
                                            epsilon=self.reward.epsilon,
                                            cost_scale=self.reward.cost_scale,
                                            episode_length=self.episode_length))


@dataclass
class EnvState:
    """Full dynamic state of one environment instance."""

    t: int  # steps taken in the episode
    start: int  # chronics row of the episode's first step
    topo: TopologyState
    dispatch: np.ndarray  # actual, per generator, MW
    target_dispatch: np.ndarray  # per generator; offsets live here for fossil
    curtail_limit: np.ndarray  # per generator, fraction of p_max (renewables)
    storage_charge: np.ndarray  # MWh
    storage_power: np.ndarray  # actual, +discharge, MW
    storage_target: np.ndarray
    line_cooldown: np.ndarray  # steps
    sub_cooldown: np.ndarray  # steps
    overload_counter: np.ndarray  # consecutive overloaded steps per line
    line_cause: np.ndarray  # CAUSE_* per line
    maint_remaining: np.ndarray  # steps left of an active maintenance window
    rng: np.random.Generator
    done: bool = False

    def copy(self) -> "EnvState":
        return copy.deepcopy(self)

    @property
    def abs_t(self) -> int:
        return self.start + self.t


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    costs: tuple[int, int]  # (C_LSI, C_TLO)
    done: bool
    info: dict


@dataclass
class StepRecord:
    """One trajectory-log row; everything a report needs is recomputable
    from these fields."""

    t: int
    action: str
    valid: bool
    reward: float
    c_lsi: int
    c_tlo: int
    done: bool
    truncated: bool
    infeasible: bool
    shortfall: bool
    n_islands: int
    r_overload: float
    r_cost: float
    losses: float
    redisp_abs: float
    storage_abs: float
    c_marginal: float
    rho: np.ndarray
    line_status: np.ndarray
    exempt: np.ndarray
    topo_hash: str
    survival: float
    margin: float
    topology_score: float


class Environment:
    """Single-writer environment; run many instances in parallel, never share one."""

    def __init__(self, config: EnvConfig, action_space: list[Action] | None = None):
        self.config = config
        self.grid = config.grid
        self.chronics = config.chronics
        if config.task == "topology":
            if action_space is None:
                action_space = list(enumerate_topology_actions(self.grid).actions)
            self.action_space = action_space
            self.bounds = None
        else:
            self.action_space = None
            self.bounds = continuous_bounds(self.grid)
        self.space_spec = env_api.build_spec(
            self.grid, config.task,
            n_actions=len(self.action_space) if self.action_space else 0,
            bounds=self.bounds,
            include_maintenance=len(self.chronics.maintenance) > 0,
            time_encoding=config.time_encoding)
        self.state: EnvState | None = None
        self.reference = reference_topology(self.grid)
        self.log: list[StepRecord] = []
        self._limits = np.array([l.thermal_limit for l in self.grid.lines])
        self._maint_by_start: dict[int, list] = {}
        for ev in self.chronics.maintenance:
            self._maint_by_start.setdefault(ev.start, []).append(ev)
        self.last_solution: FlowSolution | None = None
        self.last_max_rho: float = 0.0

    # ------------------------------------------------------------------ reset

    def reset(self, seed: int) -> np.ndarray:
        grid = self.grid
        rng = np.random.default_rng(seed)
        start = sample_episode_start(self.chronics, self.config.episode_length, rng)

        n_g = grid.n_gens
        n_s = grid.n_storages
        dispatch = np.zeros(n_g)
        target = np.zeros(n_g)
        curtail = np.ones(n_g)
        fossil_ids = grid.fossil_ids()
        ren_ids = grid.renewable_ids()
        for k, gid in enumerate(fossil_ids):
            dispatch[gid] = self.chronics.dispatch[start, k]
            target[gid] = self.chronics.dispatch[start, k]
        for j, gid in enumerate(ren_ids):
            dispatch[gid] = min(self.chronics.renewable[start, j],
                                grid.generators[gid].p_max)

        state = EnvState(
            t=0, start=start,
            topo=reference_topology(grid),
            dispatch=dispatch, target_dispatch=target, curtail_limit=curtail,
            storage_charge=np.array([0.5 * s.energy_capacity for s in grid.storages]),
            storage_power=np.zeros(n_s), storage_target=np.zeros(n_s),
            line_cooldown=np.zeros(grid.n_lines, dtype=int),
            sub_cooldown=np.zeros(grid.n_subs, dtype=int),
            overload_counter=np.zeros(grid.n_lines, dtype=int),
            line_cause=np.zeros(grid.n_lines, dtype=int),
            maint_remaining=np.zeros(grid.n_lines, dtype=int),
            rng=rng)

        # maintenance windows already active at the start step
        for ev in self.chronics.maintenance:
            if ev.start <= start < ev.start + ev.duration:
                remaining = ev.start + ev.duration - start
                status = state.topo.line_status.copy()
                status[ev.line_id] = False
                state.topo = TopologyState(state.topo.topo_vect.copy(), status)
                state.line_cause[ev.line_id] = CAUSE_MAINTENANCE
                state.maint_remaining[ev.line_id] = remaining
                state.line_cooldown[ev.line_id] = remaining

        # initial balance is unconstrained by ramps (initial condition choice)
        self._balance_slack(state, row=start, ramp_limited=False)
        sol = self._solve(state, row=start)
        self.state = state
        self.log = []
        self.last_solution = sol
        self.last_max_rho = float(np.max(sol.rho)) if sol.feasible else float("inf")
        return self._observe(state, sol, row=start)

    # ------------------------------------------------------------------- step

    def step(self, action) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.state.done:
            raise RuntimeError("episode is done; call reset()")
        action = self._coerce_action(action)
        state = self.state

        # stage 1: opponent event
        if self.config.opponent_enabled:
            if state.rng.random() < self.config.opponent_prob:
                candidates = [i for i in range(self.grid.n_lines)
                              if state.topo.line_status[i] and state.maint_remaining[i] == 0]
                if candidates:
                    victim = candidates[int(state.rng.integers(len(candidates)))]
                    status = state.topo.line_status.copy()
                    status[victim] = False
                    state.topo = TopologyState(state.topo.topo_vect.copy(), status)
                    state.line_cause[victim] = CAUSE_OPPONENT
                    state.line_cooldown[victim] = self.config.forced_cooldown
                    state.overload_counter[victim] = 0

        result = self._transition(state, action)
        self.log.append(result.info["record"])
        return result

    def simulate_record(self, action) -> StepRecord:
        """Deterministic one-step lookahead from the current state.

        Skips the opponent stage and leaves the environment (state, log, rng)
        untouched; returns the would-be step record.
        """
        if self.state is None:
            raise RuntimeError("call reset() before simulate()")
        action = self._coerce_action(action)
        saved_state, saved_log, saved_sol, saved_rho = \
            self.state, self.log, self.last_solution, self.last_max_rho
        trial = self.state.copy()
        self.state, self.log = trial, []
        try:
            result = self._transition(trial, action)
        finally:
            self.state, self.log = saved_state, saved_log
            self.last_solution, self.last_max_rho = saved_sol, saved_rho
        return result.info["record"]

    def simulate(self, action) -> tuple[float, bool]:
        """Max line loading after a simulated step (+inf when infeasible)."""
        record = self.simulate_record(action)
        if record.infeasible:
            return float("inf"), record.done
        return float(np.max(record.rho)) if len(record.rho) else 0.0, record.done

    # -------------------------------------------------------------- internals

    def _coerce_action(self, action) -> Action | np.ndarray:
        if self.config.task == "topology":
            if isinstance(action, Action):
                return action
            if isinstance(action, (int, np.integer)):
                if not 0 <= int(action) < len(self.action_space):
                    raise ActionError(f"discrete action {action} out of range "
                                      f"[0, {len(self.action_space)})")
                return self.action_space[int(action)]
            raise ActionError(f"topology task expects an action index or Action, "
                              f"got {type(action).__name__}")
        arr = np.asarray(action, dtype=float)
        if arr.shape != (self.bounds.dimension,):
            raise ActionError(f"continuous action must have shape "
                              f"({self.bounds.dimension},), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ActionError("continuous action contains non-finite entries")
        return arr

    def _transition(self, state: EnvState, action) -> StepResult:
        grid = self.grid
        cfg = self.config
        # The clamp only matters when the episode sits flush against the end
        # of the horizon; the final step then reuses the last chronics row.
        row = min(state.start + state.t + 1, self.chronics.horizon - 1)

        # stage 2: agent action
        valid = True
        encoding = action.encode() if isinstance(action, Action) else \
            "cont:" + ",".join(repr(float(x)) for x in action)
        if isinstance(action, Action):
            valid = self._apply_topology_action(state, action)
        else:
            self._apply_continuous_action(state, action)

        # stage 3: timers and maintenance
        state.line_cooldown = np.maximum(state.line_cooldown - 1, 0)
        state.sub_cooldown = np.maximum(state.sub_cooldown - 1, 0)
        state.maint_remaining = np.maximum(state.maint_remaining - 1, 0)
        for ev in self._maint_by_start.get(row, ()):  # windows starting now
            status = state.topo.line_status.copy()
            status[ev.line_id] = False
            state.topo = TopologyState(state.topo.topo_vect.copy(), status)
            state.line_cause[ev.line_id] = CAUSE_MAINTENANCE
            state.maint_remaining[ev.line_id] = ev.duration
            state.line_cooldown[ev.line_id] = ev.duration
            state.overload_counter[ev.line_id] = 0

        # stage 4: continuous dynamics
        prev_dispatch = state.dispatch.copy()
        self._advance_dispatch(state, row)

        # stage 5: slack balancing and DC solve
        shortfall = not self._balance_slack(state, row, ramp_limited=True,
                                            prev_dispatch=prev_dispatch)
        n_islands = self._stranded_islands(state)
        load_islanded = self._load_islanded(state)
        sol = None
        infeasible = shortfall or load_islanded
        if not infeasible:
            sol = self._solve(state, row)
            infeasible = not sol.feasible

        state.t += 1
        truncated = state.t >= cfg.episode_length

        if infeasible:
            state.done = True
            reward = cfg.reward.beta * -1.0
            c_lsi = (1 if shortfall else 0) + (1 if n_islands > 0 else 0)
            exempt = np.array([c in EXEMPT_CAUSES for c in state.line_cause])
            c_tlo = int(np.sum(~state.topo.line_status & ~exempt))
            survival = state.t / cfg.episode_length
            record = StepRecord(
                t=state.t, action=encoding, valid=valid, reward=reward,
                c_lsi=c_lsi, c_tlo=c_tlo, done=True, truncated=False,
                infeasible=True, shortfall=shortfall, n_islands=n_islands,
                r_overload=-1.0, r_cost=0.0, losses=0.0, redisp_abs=0.0,
                storage_abs=0.0, c_marginal=0.0,
                rho=np.array([]), line_status=state.topo.line_status.copy(),
                exempt=exempt, topo_hash=state.topo.digest(),
                survival=survival, margin=0.0,
                topology_score=float(-hamming_distance(state.topo, self.reference)))
            obs = np.zeros(self.space_spec.length)
            self.last_solution = None
            self.last_max_rho = float("inf")
            info = {"survival": survival, "valid": valid, "truncated": False,
                    "infeasible": True, "record": record,
                    "margin": 0.0, "overload_score": -1.0,
                    "topology_score": record.topology_score}
            return StepResult(obs, reward, (c_lsi, c_tlo), True, info)

        # stage 6: overload processing
        self.process_overloads(state, sol.rho)

        # stage 7: reward, costs, metrics
        # flows are reconstructed from rho so that the audit recompute from
        # trajectory logs is bit-identical to the emitted values
        flows_abs = sol.rho * self._limits
        r_over = reward_overload_from_rho(sol.rho, self._limits,
                                          state.topo.line_status,
                                          cfg.reward.epsilon)
        losses = sol.losses_estimate
        redisp_abs = 0.0
        fossil_ids = grid.fossil_ids()
        for k, gid in enumerate(fossil_ids):
            redisp_abs += abs(state.dispatch[gid] - self.chronics.dispatch[row, k])
        storage_abs = float(np.sum(np.abs(state.storage_power)))
        c_marginal = 0.0
        for g in grid.generators:
            if state.dispatch[g.id] > 0.0 and g.marginal_cost > c_marginal:
                c_marginal = g.marginal_cost
        # DC balance holds, so generation minus demand is exactly the
        # resistive loss proxy; feeding the difference directly keeps the
        # audit recompute from logs bit-identical
        r_cost = reward_cost(losses, 0.0, redisp_abs, storage_abs,
                             c_marginal, cfg.reward.cost_scale)
        reward = total_reward(cfg.reward, r_over, r_cost)

        c_lsi = 1 if n_islands > 0 else 0
        exempt = np.array([c in EXEMPT_CAUSES for c in state.line_cause])
        c_tlo = cost_tlo(sol.rho, state.topo.line_status, exempt)

        if truncated:
            state.done = True
        survival = state.t / cfg.episode_length
        ham = hamming_distance(state.topo, self.reference)
        margin, overload_score, topo_score = metrics_snapshot(
            flows_abs, self._limits, state.topo.line_status, ham,
            cfg.reward.epsilon)
        record = StepRecord(
            t=state.t, action=encoding, valid=valid, reward=reward,
            c_lsi=c_lsi, c_tlo=c_tlo, done=state.done, truncated=truncated,
            infeasible=False, shortfall=False, n_islands=n_islands,
            r_overload=r_over, r_cost=r_cost, losses=losses,
            redisp_abs=redisp_abs, storage_abs=storage_abs,
            c_marginal=c_marginal, rho=sol.rho.copy(),
            line_status=state.topo.line_status.copy(), exempt=exempt,
            topo_hash=state.topo.digest(), survival=survival,
            margin=margin, topology_score=topo_score)
        self.last_solution = sol
        self.last_max_rho = float(np.max(sol.rho)) if len(sol.rho) else 0.0
        obs = self._observe(state, sol, row)
        info = {"survival": survival, "valid": valid, "truncated": truncated,
                "infeasible": False, "record": record, "margin": margin,
                "overload_score": overload_score, "topology_score": topo_score}
        return StepResult(obs, reward, (c_lsi, c_tlo), state.done, info)

    def _apply_topology_action(self, state: EnvState, action: Action) -> bool:
        """Apply a discrete action; cooldown or maintenance violations make
        it a silent no-op and return False."""
        if action.kind == "noop":
            return True
        if action.kind == "line":
            lid = action.line_id
            if state.line_cooldown[lid] > 0 or state.maint_remaining[lid] > 0:
                return False
            connected = bool(state.topo.line_status[lid])
            change = action.to_change(state.topo.line_status)
            state.topo = apply_topology(self.grid, state.topo, change)
            state.line_cooldown[lid] = self.config.switch_cooldown
            state.line_cause[lid] = CAUSE_AGENT if connected else CAUSE_NONE
            if connected:
                state.overload_counter[lid] = 0
            return True
        # bus split
        if state.sub_cooldown[action.sub_id] > 0:
            return False
        state.topo = apply_topology(self.grid, state.topo,
                                    action.to_change(state.topo.line_status))
        state.sub_cooldown[action.sub_id] = self.config.switch_cooldown
        return True

    def _apply_continuous_action(self, state: EnvState, arr: np.ndarray) -> None:
        grid = self.grid
        lo, hi = self.bounds.low, self.bounds.high
        arr = np.clip(arr, lo, hi)
        k = 0
        for g in grid.generators:
            if g.kind == FOSSIL:
                state.target_dispatch[g.id] = float(
                    np.clip(state.target_dispatch[g.id] + arr[k], g.p_min, g.p_max))
            else:
                state.curtail_limit[g.id] = arr[k]
            k += 1
        for j in range(grid.n_storages):
            state.storage_target[j] = arr[k]
            k += 1

    def _advance_dispatch(self, state: EnvState, row: int) -> None:
        grid = self.grid
        fossil_ids = grid.fossil_ids()
        ren_ids = grid.renewable_ids()
        for k, gid in enumerate(fossil_ids):
            g = grid.generators[gid]
            if self.config.task == "redispatch":
                sched = self.chronics.dispatch[row, k]
                offset = state.target_dispatch[gid] - self.chronics.dispatch[row - 1, k] \
                    if row > 0 else 0.0
                target = float(np.clip(sched + offset, g.p_min, g.p_max))
                state.target_dispatch[gid] = target
            else:
                target = self.chronics.dispatch[row, k]
                state.target_dispatch[gid] = target
            cur = state.dispatch[gid]
            state.dispatch[gid] = float(np.clip(target, cur - g.ramp_down,
                                                cur + g.ramp_up))
        for j, gid in enumerate(ren_ids):
            g = grid.generators[gid]
            avail = self.chronics.renewable[row, j]
            state.dispatch[gid] = min(avail, state.curtail_limit[gid] * g.p_max)
        for j, sto in enumerate(grid.storages):
            p = float(np.clip(state.storage_target[j], -sto.p_charge_max,
                              sto.p_discharge_max))
            if p > 0:  # discharging, limited by stored energy
                p = min(p, state.storage_charge[j] / STEP_HOURS)
            else:  # charging, limited by remaining capacity
                p = max(p, -(sto.energy_capacity - state.storage_charge[j]) / STEP_HOURS)
            state.storage_power[j] = p
            state.storage_charge[j] = float(
                np.clip(state.storage_charge[j] - p * STEP_HOURS,
                        0.0, sto.energy_capacity))

    def _injections(self, state: EnvState, row: int) -> np.ndarray:
        grid = self.grid
        inj = np.zeros(2 * grid.n_subs)
        nodes = injection_nodes(grid, state.topo)
        for g in grid.generators:
            inj[nodes["gen"][g.id]] += state.dispatch[g.id]
        for l in grid.loads:
            inj[nodes["load"][l.id]] -= self.chronics.demand[row, l.id]
        for j in range(grid.n_storages):
            inj[nodes["storage"][j]] += state.storage_power[j]
        return inj

    def _main_component(self, state: EnvState) -> list[int]:
        comps = detect_islands(self.grid, state.topo)
        return comps[0] if comps else []

    def _stranded_islands(self, state: EnvState) -> int:
        from .power_flow import count_stranded_islands
        return count_stranded_islands(self.grid, state.topo)

    def _load_islanded(self, state: EnvState) -> bool:
        comps = detect_islands(self.grid, state.topo)
        if len(comps) <= 1:
            return False
        main = set(comps[0])
        nodes = injection_nodes(self.grid, state.topo)
        return any(int(n) not in main for n in nodes["load"])

    def _balance_slack(self, state: EnvState, row: int, ramp_limited: bool,
                       prev_dispatch: np.ndarray | None = None) -> bool:
        """Adjust the main component's largest fossil generator to balance it.

        De-energizes generators stranded outside the main component. Returns
        False when the residual exceeds the shortfall tolerance.
        """
        grid = self.grid
        main = set(self._main_component(state))
        nodes = injection_nodes(grid, state.topo)

        for g in grid.generators:  # stranded generators produce nothing
            if int(nodes["gen"][g.id]) not in main:
                state.dispatch[g.id] = 0.0

        inj = self._injections(state, row)
        imbalance = -float(sum(inj[n] for n in sorted(main)))
        slack = None
        for g in grid.generators:
            if g.kind != FOSSIL or int(nodes["gen"][g.id]) not in main:
                continue
            if slack is None or g.p_max > grid.generators[slack].p_max:
                slack = g.id
        if slack is None:
            return abs(imbalance) <= self.config.shortfall_tol
        g = grid.generators[slack]
        cur = state.dispatch[slack]
        lo, hi = g.p_min, g.p_max
        if ramp_limited and prev_dispatch is not None:
            # ramp bound is relative to last step's final dispatch, so the
            # slack's total move this step (schedule + imbalance) stays legal
            prev = prev_dispatch[slack]
            lo = max(lo, prev - g.ramp_down)
            hi = min(hi, prev + g.ramp_up)
        new = float(np.clip(cur + imbalance, lo, hi))
        residual = imbalance - (new - cur)
        state.dispatch[slack] = new
        return abs(residual) <= self.config.shortfall_tol

    def _solve(self, state: EnvState, row: int) -> FlowSolution:
        return solve_dc(self.grid, state.topo, self._injections(state, row))

    def process_overloads(self, state: EnvState, rho: np.ndarray) -> list[int]:
        """Update per-line overload counters; disconnect lines overloaded for
        a 4th consecutive step. Returns the disconnected line ids."""
        tripped = []
        for i in range(self.grid.n_lines):
            if not state.topo.line_status[i]:
                state.overload_counter[i] = 0
                continue
            if rho[i] > 1.0:
                state.overload_counter[i] += 1
            else:
                state.overload_counter[i] = 0
            if state.overload_counter[i] > OVERLOAD_GRACE_STEPS:
                tripped.append(i)
        if tripped:
            status = state.topo.line_status.copy()
            for i in tripped:
                status[i] = False
                state.line_cause[i] = CAUSE_OVERLOAD
                state.line_cooldown[i] = self.config.forced_cooldown
                state.overload_counter[i] = 0
            state.topo = TopologyState(state.topo.topo_vect.copy(), status)
        return tripped

    def _observe(self, state: EnvState, sol: FlowSolution, row: int) -> np.ndarray:
        return env_api.observe(self, state, sol, row)
