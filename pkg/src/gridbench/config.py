"""Layered run configuration: built-in defaults, an INI file, then explicit
overrides (typically command-line flags), later layers winning."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .action_space import Action, build_difficulty_level, load_ranking
from .chronics import EPISODE_STEPS, ChronicsConfig, generate_chronics, load_chronics
from .engine import EnvConfig
from .grid_model import Grid, load_grid
from .heuristics import SAFETY_THRESHOLD
from .rewards import RewardConfig

AGENT_KINDS = ("idle", "random", "greedy", "dc_optim", "linear_q")


class ConfigError(ValueError):
    """Invalid configuration file or override."""


@dataclass(frozen=True)
class AgentConfig:
    kind: str = "idle"
    learning_rate: float = 0.01
    gamma: float = 0.9
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.05
    decay_fraction: float = 0.5
    train_episodes: int = 50
    weights: str = ""  # path to a saved linear-q weights file

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}; "
                              f"expected one of {AGENT_KINDS}")


@dataclass(frozen=True)
class BenchConfig:
    """Everything a benchmark run needs, resolved from the config layers."""

    scenario: str = "bus14"  # packaged name or a .grid file path
    task: str = "topology"
    episode_length: int = EPISODE_STEPS
    opponent: bool = False
    opponent_prob: float = 1.0 / 2016.0
    switch_cooldown: int = 3
    forced_cooldown: int = 12
    time_encoding: str = "cyclic"
    difficulty: int = -1  # -1 = full catalog, otherwise an index into the table
    ranking: str = ""  # ranking artifact path, required when difficulty >= 0

    chronics_dir: str = ""  # load from this directory when set
    chronics_seed: int = 0
    horizon: int = 2 * EPISODE_STEPS
    demand_scale: float = 1.0
    noise_sigma: float = 0.02
    maintenance_rate: float = 0.0
    renewables: bool = True

    reward: RewardConfig = field(default_factory=RewardConfig)
    tau_lsi: float = 0.0
    tau_tlo: float = 50.0

    heuristic: str = "off"
    threshold: float = SAFETY_THRESHOLD

    agent: AgentConfig = field(default_factory=AgentConfig)

    episodes: int = 10
    seed: int = 0
    out_dir: str = "out"


_SCHEMA: dict[str, dict[str, type]] = {
    "environment": {
        "scenario": str, "task": str, "episode_length": int, "opponent": bool,
        "opponent_prob": float, "switch_cooldown": int, "forced_cooldown": int,
        "time_encoding": str, "difficulty": int, "ranking": str,
    },
    "chronics": {
        "chronics_dir": str, "chronics_seed": int, "horizon": int,
        "demand_scale": float, "noise_sigma": float,
        "maintenance_rate": float, "renewables": bool,
    },
    "reward": {
        "alpha": float, "beta": float, "eta": float, "epsilon": float,
        "cost_scale": float,
    },
    "constraints": {"tau_lsi": float, "tau_tlo": float},
    "heuristic": {"mode": str, "threshold": float},
    "agent": {
        "kind": str, "learning_rate": float, "gamma": float,
        "epsilon_initial": float, "epsilon_final": float,
        "decay_fraction": float, "train_episodes": int, "weights": str,
    },
    "run": {"episodes": int, "seed": int, "out_dir": str},
}

_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")


def _convert(section: str, key: str, raw: str, kind: type):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} "
                          f"as {kind.__name__}") from None


def _collect(path, overrides: dict[str, str] | None) -> dict[str, dict]:
    values: dict[str, dict] = {s: {} for s in _SCHEMA}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                values[section][key] = _convert(section, key, raw,
                                                _SCHEMA[section][key])
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown override {dotted!r}")
        values[section][key] = _convert(section, key, str(raw),
                                        _SCHEMA[section][key])
    return values


def load_config(path=None, overrides: dict[str, str] | None = None) -> BenchConfig:
    """Resolve the configuration layers into one immutable BenchConfig."""
    v = _collect(path, overrides)
    reward_kwargs = dict(v["reward"])
    agent_kwargs = dict(v["agent"])
    env = dict(v["environment"])
    chron = dict(v["chronics"])
    cons = dict(v["constraints"])
    heur = dict(v["heuristic"])
    run = dict(v["run"])
    episode_length = env.get("episode_length", EPISODE_STEPS)
    reward = RewardConfig(episode_length=episode_length, **reward_kwargs)
    cfg = BenchConfig(
        scenario=env.get("scenario", "bus14"),
        task=env.get("task", "topology"),
        episode_length=episode_length,
        opponent=env.get("opponent", False),
        opponent_prob=env.get("opponent_prob", 1.0 / 2016.0),
        switch_cooldown=env.get("switch_cooldown", 3),
        forced_cooldown=env.get("forced_cooldown", 12),
        time_encoding=env.get("time_encoding", "cyclic"),
        difficulty=env.get("difficulty", -1),
        ranking=env.get("ranking", ""),
        chronics_dir=chron.get("chronics_dir", ""),
        chronics_seed=chron.get("chronics_seed", 0),
        horizon=chron.get("horizon", 2 * EPISODE_STEPS),
        demand_scale=chron.get("demand_scale", 1.0),
        noise_sigma=chron.get("noise_sigma", 0.02),
        maintenance_rate=chron.get("maintenance_rate", 0.0),
        renewables=chron.get("renewables", True),
        reward=reward,
        tau_lsi=cons.get("tau_lsi", 0.0),
        tau_tlo=cons.get("tau_tlo", 50.0),
        heuristic=heur.get("mode", "off"),
        threshold=heur.get("threshold", SAFETY_THRESHOLD),
        agent=AgentConfig(**agent_kwargs),
        episodes=run.get("episodes", 10),
        seed=run.get("seed", 0),
        out_dir=run.get("out_dir", "out"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: BenchConfig) -> None:
    if cfg.task not in ("topology", "redispatch"):
        raise ConfigError(f"unknown task {cfg.task!r}")
    if cfg.time_encoding not in ("cyclic", "scalar"):
        raise ConfigError(f"unknown time encoding {cfg.time_encoding!r}")
    if cfg.heuristic not in ("off", "idle", "recovery"):
        raise ConfigError(f"unknown heuristic mode {cfg.heuristic!r}")
    if cfg.episode_length < 1:
        raise ConfigError("episode_length must be >= 1")
    if not cfg.chronics_dir and cfg.horizon < cfg.episode_length:
        raise ConfigError(f"horizon {cfg.horizon} shorter than episode "
                          f"length {cfg.episode_length}")
    if not 0.0 <= cfg.opponent_prob <= 1.0:
        raise ConfigError("opponent_prob must be in [0, 1]")
    if cfg.episodes < 1:
        raise ConfigError("episodes must be >= 1")
    if cfg.difficulty >= 0 and not cfg.ranking:
        raise ConfigError("difficulty levels require a ranking artifact; "
                          "set [environment] ranking or run the rank command")


def resolve_scenario(name_or_path: str) -> Path:
    """A packaged scenario name or a .grid file path."""
    p = Path(name_or_path)
    if p.suffix == ".grid" or p.exists():
        if not p.exists():
            raise ConfigError(f"scenario file not found: {p}")
        return p
    packaged = resources.files("gridbench.data") / f"{name_or_path}.grid"
    with resources.as_file(packaged) as fp:
        if not fp.exists():
            raise ConfigError(f"unknown scenario {name_or_path!r}")
        return Path(fp)


def load_scenario(cfg: BenchConfig) -> Grid:
    return load_grid(resolve_scenario(cfg.scenario))


def build_chronics(cfg: BenchConfig, grid: Grid):
    if cfg.chronics_dir:
        return load_chronics(cfg.chronics_dir)
    return generate_chronics(grid, cfg.horizon, cfg.chronics_seed,
                             ChronicsConfig(demand_scale=cfg.demand_scale,
                                            noise_sigma=cfg.noise_sigma,
                                            maintenance_rate=cfg.maintenance_rate,
                                            renewable_enabled=cfg.renewables))


def build_action_space(cfg: BenchConfig, grid: Grid) -> list[Action] | None:
    """None = full catalog; otherwise the ranked difficulty-level subset."""
    if cfg.task != "topology" or cfg.difficulty < 0:
        return None
    ranked = load_ranking(cfg.ranking)
    return build_difficulty_level(ranked, cfg.difficulty, grid)


def build_env_config(cfg: BenchConfig, grid: Grid | None = None,
                     chronics=None) -> EnvConfig:
    grid = grid if grid is not None else load_scenario(cfg)
    chronics = chronics if chronics is not None else build_chronics(cfg, grid)
    return EnvConfig(grid=grid, chronics=chronics, task=cfg.task,
                     episode_length=cfg.episode_length, reward=cfg.reward,
                     opponent_enabled=cfg.opponent,
                     opponent_prob=cfg.opponent_prob,
                     switch_cooldown=cfg.switch_cooldown,
                     forced_cooldown=cfg.forced_cooldown,
                     time_encoding=cfg.time_encoding)
