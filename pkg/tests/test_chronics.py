"""Chronics generation and persistence: determinism, schedule balance,
ramp feasibility, maintenance structure, and lossless round-trips."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gridbench.chronics import (EPISODE_STEPS, STEP_MINUTES, STEPS_PER_DAY,
                                ChronicsConfig, generate_chronics,
                                load_chronics, sample_episode_start,
                                save_chronics)

from conftest import flat_chronics


def test_step_constants():
    # [TRIVIAL] 5-minute steps, 288 per day, four-week default episode
    assert STEP_MINUTES == 5
    assert STEPS_PER_DAY == 288
    assert EPISODE_STEPS == 8064


def test_shapes_and_determinism(grid):
    a = generate_chronics(grid, horizon=500, seed=9)
    b = generate_chronics(grid, horizon=500, seed=9)
    c = generate_chronics(grid, horizon=500, seed=10)
    assert a.demand.shape == (500, grid.n_loads)
    assert a.renewable.shape == (500, len(grid.renewable_ids()))
    assert a.dispatch.shape == (500, len(grid.fossil_ids()))
    assert np.array_equal(a.demand, b.demand)
    assert np.array_equal(a.dispatch, b.dispatch)
    assert not np.array_equal(a.demand, c.demand)


def test_series_nonnegative_and_capped(grid):
    ch = generate_chronics(grid, horizon=2000, seed=4)
    assert np.all(ch.demand >= 0.0)
    assert np.all(ch.renewable >= 0.0)
    for j, gid in enumerate(grid.renewable_ids()):
        assert np.all(ch.renewable[:, j] <= grid.generators[gid].p_max)
    for k, gid in enumerate(grid.fossil_ids()):
        g = grid.generators[gid]
        assert np.all(ch.dispatch[:, k] >= g.p_min - 1e-12)
        assert np.all(ch.dispatch[:, k] <= g.p_max + 1e-12)


def test_zero_noise_schedule_balances_exactly(grid):
    # [DERIVED] with noise and renewables off, scheduled fossil output must
    # cover demand exactly (largest unit absorbs the allocation residual)
    ch = flat_chronics(grid)
    total_sched = ch.dispatch.sum(axis=1)
    total_demand = ch.demand.sum(axis=1)
    assert np.allclose(total_sched, total_demand, atol=1e-9)


def test_schedule_respects_ramps(grid):
    ch = generate_chronics(grid, horizon=1500, seed=21,
                           config=ChronicsConfig(noise_sigma=0.1))
    for k, gid in enumerate(grid.fossil_ids()):
        g = grid.generators[gid]
        diffs = np.diff(ch.dispatch[:, k])
        assert np.all(diffs <= g.ramp_up + 1e-9)
        assert np.all(diffs >= -g.ramp_down - 1e-9)


def test_daily_shape_peaks_in_evening(grid):
    # demand at the configured peak hour exceeds the overnight trough
    ch = generate_chronics(grid, horizon=STEPS_PER_DAY, seed=0,
                           config=ChronicsConfig(noise_sigma=0.0,
                                                 weekly_amplitude=0.0))
    total = ch.demand.sum(axis=1)
    peak_step = int(18 * 60 // STEP_MINUTES)
    trough_step = int(6 * 60 // STEP_MINUTES)
    assert total[peak_step] > total[trough_step]


def test_maintenance_windows_do_not_overlap(grid):
    ch = generate_chronics(grid, horizon=3000, seed=13,
                           config=ChronicsConfig(maintenance_rate=0.01))
    assert len(ch.maintenance) > 0
    by_line = {}
    for ev in ch.maintenance:
        by_line.setdefault(ev.line_id, []).append(ev)
    for events in by_line.values():
        events.sort(key=lambda e: e.start)
        for prev, nxt in zip(events, events[1:]):
            assert prev.start + prev.duration <= nxt.start


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), horizon=st.integers(10, 400))
def test_generation_invariants(grid, seed, horizon):
    ch = generate_chronics(grid, horizon=horizon, seed=seed)
    assert ch.horizon == horizon
    assert np.all(np.isfinite(ch.demand))
    assert np.all(np.isfinite(ch.dispatch))
    assert np.all(ch.demand >= 0.0)


def test_immutability(grid, calm_chronics):
    with pytest.raises(ValueError):
        calm_chronics.demand[0, 0] = 1.0


def test_start_sampling_uniform(grid, calm_chronics):
    # [DERIVED] chi-square on the start-index histogram; horizon 600,
    # episode 500 gives 101 admissible starts
    rng = np.random.default_rng(0)
    n_bins = calm_chronics.horizon - 500 + 1
    draws = np.array([sample_episode_start(calm_chronics, 500, rng)
                      for _ in range(20_000)])
    assert draws.min() >= 0 and draws.max() <= n_bins - 1
    observed = np.bincount(draws, minlength=n_bins)
    _, p = stats.chisquare(observed)
    assert p > 0.001


def test_start_sampling_rejects_short_horizon(grid, calm_chronics):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="horizon"):
        sample_episode_start(calm_chronics, calm_chronics.horizon + 1, rng)


def test_round_trip_bit_exact(grid, tmp_path):
    ch = generate_chronics(grid, horizon=300, seed=17,
                           config=ChronicsConfig(maintenance_rate=0.005))
    save_chronics(ch, tmp_path / "chron")
    back = load_chronics(tmp_path / "chron")
    assert back.horizon == ch.horizon
    assert np.array_equal(back.demand, ch.demand)
    assert np.array_equal(back.renewable, ch.renewable)
    assert np.array_equal(back.dispatch, ch.dispatch)
    assert back.maintenance == ch.maintenance


def test_load_rejects_unknown_version(grid, tmp_path):
    ch = generate_chronics(grid, horizon=50, seed=0)
    save_chronics(ch, tmp_path / "chron")
    manifest = tmp_path / "chron" / "manifest.json"
    manifest.write_text(manifest.read_text().replace('"format_version": 1',
                                                     '"format_version": 99'))
    with pytest.raises(ValueError, match="version"):
        load_chronics(tmp_path / "chron")
