"""Bridge fidelity: bridged trajectories must be indistinguishable from
native ones for identical (config, seed, actions)."""

from __future__ import annotations

import numpy as np
import pytest

from gridbench.config import (ConfigError, build_chronics, build_env_config,
                              load_config, load_scenario)
from gridbench.engine import Environment

from gridbridge import EnvHandle, VectorHandle, make


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "bench.ini"
    p.write_text(
        "[environment]\nscenario = bus14\nepisode_length = 80\n"
        "[chronics]\nhorizon = 400\nchronics_seed = 3\n")
    return p


@pytest.fixture(scope="module")
def native_env(config_file):
    cfg = load_config(config_file)
    grid = load_scenario(cfg)
    return Environment(build_env_config(cfg, grid, build_chronics(cfg, grid)))


def scripted_actions(env, episode_seed: int):
    """Deterministic mildly active action sequence for one episode."""
    rng = np.random.default_rng(episode_seed)
    n = len(env.action_space)
    while True:
        yield 0 if rng.random() < 0.8 else int(rng.integers(n))


def test_spec_handshake(config_file, native_env):
    h = EnvHandle(config_file)
    assert h.observation_length == native_env.space_spec.length
    assert h.n_actions == len(native_env.action_space)
    assert h.space_json() == native_env.space_spec.to_json()
    low, high = h.action_bounds
    assert low.size == high.size == 0  # discrete task


def test_reset_matches_native(config_file, native_env):
    h = EnvHandle(config_file)
    got = h.reset(seed=11)
    want = native_env.reset(seed=11)
    assert got.shape == (h.observation_length,)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_replay_fidelity(config_file, native_env):
    h = EnvHandle(config_file)
    for episode in range(10):
        native_obs = native_env.reset(seed=episode)
        bridge_obs = h.reset(seed=episode)
        assert np.max(np.abs(bridge_obs - native_obs)) <= 1e-12
        native_script = scripted_actions(native_env, 1000 + episode)
        bridge_script = scripted_actions(native_env, 1000 + episode)
        done = False
        while not done:
            res = native_env.step(next(native_script))
            obs, reward, costs, done, info = h.step(next(bridge_script))
            assert reward == res.reward  # bit-exact
            assert costs == res.costs
            assert done == res.done
            assert np.max(np.abs(obs - res.observation)) <= 1e-12
            assert info["record"].topo_hash == res.info["record"].topo_hash


def test_step_after_done_raises(config_file):
    h = EnvHandle(config_file)
    h.reset(seed=0)
    while not h.step(0)[3]:
        pass
    assert h.done
    with pytest.raises(RuntimeError, match="reset"):
        h.step(0)


def test_malformed_action_leaves_state_untouched(config_file):
    h = EnvHandle(config_file)
    h.reset(seed=5)
    before = h._env.state.t
    with pytest.raises(ValueError):
        h.step(10 ** 6)
    assert h._env.state.t == before
    obs, reward, costs, done, info = h.step(0)  # still usable
    assert not done


def test_bad_config_path_names_path(tmp_path):
    missing = tmp_path / "absent.ini"
    with pytest.raises(ConfigError, match="absent.ini"):
        EnvHandle(missing)


def test_heuristic_mode_wraps(config_file, native_env):
    h = EnvHandle(config_file, {"heuristic.mode": "idle"})
    h.reset(seed=4)
    obs, reward, costs, done, info = h.step(0)
    assert info["n"] >= 1  # macro-step accounting from the wrapper


def test_make_overrides(config_file):
    h = make(config_file, environment_episode_length=30)
    h.reset(seed=0)
    steps = 0
    done = False
    while not done:
        done = h.step(0)[3]
        steps += 1
    assert steps == 30


def test_vector_handle_shapes(config_file):
    v = VectorHandle.from_config(config_file, k=3)
    obs = v.reset([1, 2, 3])
    assert obs.shape == (3, v.handles[0].observation_length)
    stacked, rewards, costs, dones, infos = v.step([0, 0, 0])
    assert stacked.shape == obs.shape
    assert rewards.shape == (3,)
    assert costs.shape == (3, 2)
    assert dones.shape == (3,)
    assert len(infos) == 3
    assert not v.dones.any()


def test_vector_handle_independent_streams(config_file):
    v = VectorHandle.from_config(config_file, k=2)
    v.reset([7, 7])
    a, _, _, _, _ = v.step([0, 0])
    assert np.array_equal(a[0], a[1])  # same seed, same trajectory


def test_vector_handle_validates_lengths(config_file):
    v = VectorHandle.from_config(config_file, k=2)
    with pytest.raises(ValueError, match="seeds"):
        v.reset([1])
    v.reset([1, 2])
    with pytest.raises(ValueError, match="actions"):
        v.step([0])
    with pytest.raises(ValueError, match="handle"):
        VectorHandle([])
