"""Observation layout and the JSON space descriptor."""

from __future__ import annotations

import numpy as np
import pytest

from gridbench.engine import EnvConfig, Environment
from gridbench.env_api import SpaceSpec, block_layout, build_spec

from conftest import flat_chronics, storage_grid


def test_topology_observation_length(grid, calm_chronics):
    # [DERIVED] 6 time + 2*6 gen + 2*11 load + 2*20 line + 57 topo
    # + 20 status + 20 overflow + 14 sub cooldown = 191
    env = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                episode_length=50))
    assert env.space_spec.length == 191
    obs = env.reset(seed=0)
    assert obs.shape == (191,)
    assert np.all(np.isfinite(obs))


def test_scalar_time_encoding_shrinks_by_five(grid, calm_chronics):
    cyclic = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                   episode_length=50))
    scalar = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                   episode_length=50, time_encoding="scalar"))
    assert cyclic.space_spec.length - scalar.space_spec.length == 5
    obs = scalar.reset(seed=0)
    t_slice = scalar.space_spec.slice_of("time")
    assert t_slice.stop - t_slice.start == 1
    assert obs[t_slice][0] == float(scalar.state.start)


def test_slices_partition_the_vector(grid, calm_chronics):
    env = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                episode_length=50))
    spec = env.space_spec
    pos = 0
    for name, a, b in spec.slices:
        assert a == pos and b > a
        pos = b
    assert pos == spec.length
    with pytest.raises(KeyError):
        spec.slice_of("nope")


def test_named_blocks_carry_expected_values(grid, calm_chronics):
    env = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                episode_length=50))
    obs = env.reset(seed=1)
    spec = env.space_spec
    assert np.array_equal(obs[spec.slice_of("gen_p")], env.state.dispatch)
    assert np.array_equal(obs[spec.slice_of("topo_vect")],
                          env.state.topo.topo_vect.astype(float))
    assert np.array_equal(obs[spec.slice_of("line_status")],
                          np.ones(grid.n_lines))
    rho = obs[spec.slice_of("rho")]
    assert np.array_equal(rho, env.last_solution.rho)
    row = env.state.start
    assert np.array_equal(obs[spec.slice_of("load_p")],
                          env.chronics.demand[row])


def test_cyclic_time_features_bounded(grid, calm_chronics):
    env = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                episode_length=50))
    obs = env.reset(seed=0)
    t = obs[env.space_spec.slice_of("time")]
    assert np.all(np.abs(t) <= 1.0)
    # consecutive sin/cos pairs lie on the unit circle
    for k in range(0, 6, 2):
        assert t[k] ** 2 + t[k + 1] ** 2 == pytest.approx(1.0)


def test_redispatch_blocks(grid, calm_chronics):
    env = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                task="redispatch", episode_length=50))
    spec = env.space_spec
    names = spec.block_names()
    for required in ("tg_dispatch", "curr_dispatch", "gen_margin_up",
                     "gen_margin_down", "curtail", "curtail_limit"):
        assert required in names
    assert "topo_vect" not in names
    assert spec.n_actions == 0
    assert len(spec.action_low) == 6
    obs = env.reset(seed=0)
    assert np.array_equal(obs[spec.slice_of("curr_dispatch")],
                          env.state.dispatch)


def test_storage_blocks_present():
    g = storage_grid()
    env = Environment(EnvConfig(grid=g, chronics=flat_chronics(g),
                                task="redispatch", episode_length=50))
    names = env.space_spec.block_names()
    for required in ("storage_charge", "storage_power_tg", "storage_power",
                     "storage_theta"):
        assert required in names
    obs = env.reset(seed=0)
    charge = obs[env.space_spec.slice_of("storage_charge")]
    assert charge[0] == 0.5 * g.storages[0].energy_capacity


def test_maintenance_blocks_toggle(grid, calm_chronics):
    without = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                    episode_length=50))
    assert "time_next_maint" not in without.space_spec.block_names()


def test_spec_json_round_trip(grid, calm_chronics):
    env = Environment(EnvConfig(grid=grid, chronics=calm_chronics,
                                episode_length=50))
    text = env.space_spec.to_json()
    back = SpaceSpec.from_json(text)
    assert back == env.space_spec
    assert back.to_json() == text  # canonical form is stable


def test_block_layout_is_pure(grid):
    a = block_layout(grid, "topology", include_maintenance=False,
                     time_encoding="cyclic")
    b = block_layout(grid, "topology", include_maintenance=False,
                     time_encoding="cyclic")
    assert a == b
