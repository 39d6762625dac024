"""Reward and cost formulas on hand-computed cases plus range properties."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridbench.rewards import (CostAccumulator, RewardConfig, cost_lsi,
                               cost_tlo, metrics_snapshot, reward_cost,
                               reward_overload, reward_overload_from_rho,
                               reward_survive, total_reward)


def test_default_weights():
    # [PAPER] alpha 1.0, beta 0.5, eta 0.5; LSI tau 0, TLO tau 50
    cfg = RewardConfig()
    assert (cfg.alpha, cfg.beta, cfg.eta) == (1.0, 0.5, 0.5)
    acc = CostAccumulator()
    assert (acc.tau_lsi, acc.tau_tlo) == (0.0, 50.0)


def test_survive_sums_to_one():
    # [TRIVIAL] per-step survive reward is 1/T
    assert reward_survive(8064) * 8064 == pytest.approx(1.0)
    assert reward_survive(1) == 1.0
    with pytest.raises(ValueError):
        reward_survive(0)


def test_overload_hand_case():
    # [DERIVED] two lines: one at 120/100 (20% over), one disconnected;
    # penalty = (0.2/(1+eps scaled) + 1)/2
    limits = np.array([100.0, 100.0])
    flows = np.array([120.0, 0.0])
    status = np.array([True, False])
    got = reward_overload(flows, limits, status, epsilon=0.0)
    assert got == pytest.approx(-(0.2 + 1.0) / 2.0)


def test_overload_bonus_when_nominal():
    # all connected, none overloaded: mean free-capacity fraction
    limits = np.array([100.0, 50.0])
    flows = np.array([60.0, 40.0])
    status = np.array([True, True])
    got = reward_overload(flows, limits, status, epsilon=1e-6)
    assert got == pytest.approx((0.4 + 0.2) / 2.0)
    assert 0.0 <= got <= 1.0


def test_overload_clamped_to_unit_interval():
    limits = np.array([10.0])
    flows = np.array([500.0])  # 4900% over, clamps at -1
    status = np.array([True])
    assert reward_overload(flows, limits, status, 0.0) == -1.0


def test_overload_from_rho_matches():
    limits = np.array([80.0, 30.0, 55.0])
    flows = np.array([92.0, 10.0, 55.5])
    status = np.array([True, True, True])
    rho = np.abs(flows) / limits
    assert reward_overload_from_rho(rho, limits, status, 1e-6) == \
        reward_overload(rho * limits, limits, status, 1e-6)


def test_cost_hand_case():
    # [DERIVED] (losses 5 + redispatch 20 + storage 3) * 40 / 10000
    got = reward_cost(p_gen=105.0, p_demand=100.0, redisp_abs=20.0,
                      storage_abs=3.0, c_marginal=40.0, scale=10_000.0)
    assert got == pytest.approx(-(5.0 + 20.0 + 3.0) * 40.0 / 10_000.0)


def test_cost_clamped():
    assert reward_cost(1e9, 0.0, 0.0, 0.0, 100.0, 10_000.0) == -1.0
    assert reward_cost(100.0, 100.0, 0.0, 0.0, 100.0, 10_000.0) == 0.0


def test_cost_lsi_cases():
    assert cost_lsi(p_gen=100.0, p_demand=100.0, n_islands=0) == 0
    assert cost_lsi(p_gen=90.0, p_demand=100.0, n_islands=0) == 1
    assert cost_lsi(p_gen=100.0, p_demand=100.0, n_islands=2) == 1
    assert cost_lsi(p_gen=90.0, p_demand=100.0, n_islands=1) == 2


def test_cost_tlo_counts_and_exemptions():
    rho = np.array([1.2, 0.8, 0.0, 0.0])
    status = np.array([True, True, False, False])
    exempt = np.array([False, False, True, False])
    # one overload + one non-exempt disconnection
    assert cost_tlo(rho, status, exempt) == 2
    # boundary: rho exactly 1 is not an overload
    assert cost_tlo(np.array([1.0]), np.array([True]), np.array([False])) == 0


def test_total_reward_composition():
    cfg = RewardConfig(episode_length=100)
    got = total_reward(cfg, r_overload=-0.4, r_cost=-0.1)
    assert got == pytest.approx(1.0 / 100 + 0.5 * -0.4 + 0.5 * -0.1)


@given(st.lists(st.floats(0.0, 500.0), min_size=1, max_size=20),
       st.lists(st.booleans(), min_size=20, max_size=20))
def test_overload_range_property(flows, status):
    n = len(flows)
    limits = np.full(n, 100.0)
    got = reward_overload(np.array(flows), limits,
                          np.array(status[:n]), epsilon=1e-6)
    assert -1.0 <= got <= 1.0


@given(st.floats(0.0, 1e7), st.floats(0.0, 1e5), st.floats(0.0, 1e5),
       st.floats(0.0, 200.0))
def test_cost_range_property(losses, redisp, storage, price):
    got = reward_cost(losses, 0.0, redisp, storage, price, 10_000.0)
    assert -1.0 <= got <= 0.0


def test_metrics_snapshot():
    limits = np.array([100.0, 50.0])
    flows = np.array([60.0, 0.0])
    status = np.array([True, False])
    margin, overload_score, topo_score = metrics_snapshot(
        flows, limits, status, hamming_to_reference=3, epsilon=1e-6)
    assert margin == pytest.approx(40.0 - 1.0)
    assert overload_score == reward_overload(flows, limits, status, 1e-6)
    assert topo_score == -3.0
