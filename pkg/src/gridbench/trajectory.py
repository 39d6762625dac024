"""Trajectory logs: CSV round-trip of step records and the audit recompute.

Floats are written with repr() so the round-trip is lossless; the audit
recomputes every reward and cost from the logged inputs and flags any row
whose recomputed values are not bit-identical to the emitted ones.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .engine import StepRecord
from .rewards import (RewardConfig, cost_tlo, reward_cost,
                      reward_overload_from_rho, total_reward)

LOG_VERSION = 1

COLUMNS = [
    "t", "action", "valid", "reward", "c_lsi", "c_tlo", "done", "truncated",
    "infeasible", "shortfall", "n_islands", "r_overload", "r_cost", "losses",
    "redisp_abs", "storage_abs", "c_marginal", "rho", "line_status", "exempt",
    "topo_hash", "survival", "margin", "topology_score",
]


def _bits(arr: np.ndarray) -> str:
    return "".join("1" if bool(x) else "0" for x in arr)


def _floats(arr: np.ndarray) -> str:
    return ";".join(repr(float(x)) for x in arr)


def save_log(records: list[StepRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([
                r.t, r.action, int(r.valid), repr(float(r.reward)),
                r.c_lsi, r.c_tlo,
                int(r.done), int(r.truncated), int(r.infeasible),
                int(r.shortfall), r.n_islands, repr(float(r.r_overload)),
                repr(float(r.r_cost)), repr(float(r.losses)),
                repr(float(r.redisp_abs)), repr(float(r.storage_abs)),
                repr(float(r.c_marginal)), _floats(r.rho),
                _bits(r.line_status), _bits(r.exempt), r.topo_hash,
                repr(float(r.survival)), repr(float(r.margin)),
                repr(float(r.topology_score)),
            ])


def load_log(path) -> list[StepRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != COLUMNS:
        raise ValueError(f"not a trajectory log: {path}")
    out = []
    for row in rows[1:]:
        d = dict(zip(COLUMNS, row))
        out.append(StepRecord(
            t=int(d["t"]), action=d["action"], valid=bool(int(d["valid"])),
            reward=float(d["reward"]), c_lsi=int(d["c_lsi"]),
            c_tlo=int(d["c_tlo"]), done=bool(int(d["done"])),
            truncated=bool(int(d["truncated"])),
            infeasible=bool(int(d["infeasible"])),
            shortfall=bool(int(d["shortfall"])),
            n_islands=int(d["n_islands"]), r_overload=float(d["r_overload"]),
            r_cost=float(d["r_cost"]), losses=float(d["losses"]),
            redisp_abs=float(d["redisp_abs"]),
            storage_abs=float(d["storage_abs"]),
            c_marginal=float(d["c_marginal"]),
            rho=np.array([float(x) for x in d["rho"].split(";")]) if d["rho"]
            else np.array([]),
            line_status=np.array([c == "1" for c in d["line_status"]]),
            exempt=np.array([c == "1" for c in d["exempt"]]),
            topo_hash=d["topo_hash"], survival=float(d["survival"]),
            margin=float(d["margin"]),
            topology_score=float(d["topology_score"])))
    return out


def audit_records(records: list[StepRecord], limits: np.ndarray,
                  reward_cfg: RewardConfig) -> list[str]:
    """Recompute rewards and costs from logged inputs; return mismatch notes.

    An empty list means every row is bit-identical to its recomputation.
    """
    problems = []
    for r in records:
        if r.infeasible:
            reward = reward_cfg.beta * -1.0
            c_lsi = (1 if r.shortfall else 0) + (1 if r.n_islands > 0 else 0)
            c_tlo = int(np.sum(~r.line_status & ~r.exempt))
            r_over, r_cost = -1.0, 0.0
        else:
            r_over = reward_overload_from_rho(r.rho, limits, r.line_status,
                                              reward_cfg.epsilon)
            r_cost = reward_cost(r.losses, 0.0, r.redisp_abs, r.storage_abs,
                                 r.c_marginal, reward_cfg.cost_scale)
            reward = total_reward(reward_cfg, r_over, r_cost)
            c_lsi = 1 if r.n_islands > 0 else 0
            c_tlo = cost_tlo(r.rho, r.line_status, r.exempt)
        for name, got, want in (("reward", r.reward, reward),
                                ("r_overload", r.r_overload, r_over),
                                ("r_cost", r.r_cost, r_cost),
                                ("c_lsi", r.c_lsi, c_lsi),
                                ("c_tlo", r.c_tlo, c_tlo)):
            if got != want:
                problems.append(f"t={r.t}: {name} logged {got!r}, "
                                f"recomputed {want!r}")
    return problems
