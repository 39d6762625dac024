"""Shared fixtures: the packaged 14-substation scenario, small deterministic
chronics, and toy grids for hand-checkable cases."""

from __future__ import annotations

import numpy as np
import pytest

from gridbench.chronics import ChronicsConfig, generate_chronics
from gridbench.config import resolve_scenario
from gridbench.engine import EnvConfig, Environment
from gridbench.grid_model import (Generator, Grid, Line, Load, Storage,
                                  Substation, load_grid)


@pytest.fixture(scope="session")
def grid():
    return load_grid(resolve_scenario("bus14"))


@pytest.fixture(scope="session")
def calm_chronics(grid):
    """Short, mild chronics for fast episode tests."""
    return generate_chronics(grid, horizon=600, seed=3, config=ChronicsConfig())


@pytest.fixture
def env(grid, calm_chronics):
    return Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                 episode_length=200))


def make_env(grid, chronics, **kw) -> Environment:
    return Environment(EnvConfig(grid=grid, chronics=chronics, **kw))


def triangle_grid(limits=(50.0, 50.0, 65.0), reactances=(0.125, 0.125, 0.125)) -> Grid:
    """Three substations in a ring: one generator at 0, one load at 2.

    Reactances and base are exactly representable so the hand-solved flow
    split is reproduced without rounding. Limits keep the nominal 30/30/60
    split just inside the safe region.
    """
    return Grid(
        name="triangle", base_mva=1.0,
        substations=tuple(Substation(i) for i in range(3)),
        lines=(Line(0, 0, 1, reactances[0], 0.0, limits[0]),
               Line(1, 1, 2, reactances[1], 0.0, limits[1]),
               Line(2, 0, 2, reactances[2], 0.0, limits[2])),
        generators=(Generator(0, 0, "fossil", 0.0, 200.0, 50.0, 50.0, 40.0),),
        loads=(Load(0, 2, 90.0),),
        storages=())


def storage_grid() -> Grid:
    """Two substations, one line, fossil generator, load, and a storage unit."""
    return Grid(
        name="storage-pair", base_mva=100.0,
        substations=(Substation(0), Substation(1)),
        lines=(Line(0, 0, 1, 0.1, 0.01, 120.0),),
        generators=(Generator(0, 0, "fossil", 0.0, 150.0, 30.0, 30.0, 40.0),),
        loads=(Load(0, 1, 60.0),),
        storages=(Storage(0, 1, energy_capacity=10.0,
                          p_charge_max=12.0, p_discharge_max=12.0),))


def flat_chronics(grid: Grid, horizon: int = 400) -> "Chronics":
    """Noise-free, renewable-free chronics: constant demand, exact schedules."""
    return generate_chronics(grid, horizon=horizon, seed=0,
                             config=ChronicsConfig(daily_amplitude=0.0,
                                                   weekly_amplitude=0.0,
                                                   noise_sigma=0.0,
                                                   renewable_enabled=False))


@pytest.fixture(scope="session")
def stress_env_config(grid):
    """Elevated demand plus opponent; the setup agents are compared under."""
    chron = generate_chronics(grid, horizon=1200, seed=7,
                              config=ChronicsConfig(demand_scale=1.25))
    return EnvConfig(grid=grid, chronics=chron, episode_length=500,
                     opponent_enabled=True, opponent_prob=1.0 / 200.0,
                     forced_cooldown=3)


def run_noop_episode(env: Environment, seed: int) -> list:
    env.reset(seed)
    done = False
    while not done:
        done = env.step(0).done
    return list(env.log)
