"""Synthetic scenario time series: demand, renewable availability, schedules,
and maintenance windows at 5-minute resolution."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid_model import FOSSIL, RENEWABLE, Grid

STEP_MINUTES = 5
STEPS_PER_DAY = 24 * 60 // STEP_MINUTES  # 288
EPISODE_STEPS = 28 * STEPS_PER_DAY  # 8064, four whole weeks

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MaintenanceEvent:
    line_id: int
    start: int  # step index
    duration: int  # steps


@dataclass(frozen=True)
class Chronics:
    """Immutable time-indexed scenario data.

    Columns follow grid component id order: ``demand[t, i]`` is load i,
    ``renewable[t, j]`` is the j-th renewable generator (grid renewable_ids
    order), ``dispatch[t, k]`` the k-th fossil generator (fossil_ids order).
    """

    horizon: int
    demand: np.ndarray  # (horizon, n_loads) MW
    renewable: np.ndarray  # (horizon, n_renewables) MW available
    dispatch: np.ndarray  # (horizon, n_fossil) MW scheduled
    maintenance: tuple[MaintenanceEvent, ...]

    def __post_init__(self):
        for arr in (self.demand, self.renewable, self.dispatch):
            if arr.shape[0] != self.horizon:
                raise ValueError("all series must have length = horizon")
        self.demand.setflags(write=False)
        self.renewable.setflags(write=False)
        self.dispatch.setflags(write=False)


@dataclass(frozen=True)
class ChronicsConfig:
    """Knobs for the parametric generator; defaults give a mild, solvable grid."""

    demand_scale: float = 1.0
    daily_amplitude: float = 0.15
    weekly_amplitude: float = 0.05
    noise_sigma: float = 0.02  # lognormal sigma; 0 disables noise
    renewable_enabled: bool = True
    wind_mean_fraction: float = 0.5
    wind_autocorr: float = 0.99
    wind_sigma: float = 0.05
    maintenance_rate: float = 0.0  # per line per step probability of a window starting
    maintenance_duration: int = 12  # steps
    peak_hour: float = 18.0


def _daily_factor(t: np.ndarray, cfg: ChronicsConfig) -> np.ndarray:
    hours = (t * STEP_MINUTES / 60.0) % 24.0
    return 1.0 + cfg.daily_amplitude * np.sin(2 * np.pi * (hours - cfg.peak_hour + 6.0) / 24.0)


def _weekly_factor(t: np.ndarray, cfg: ChronicsConfig) -> np.ndarray:
    days = (t // STEPS_PER_DAY) % 7
    return np.where(days >= 5, 1.0 - cfg.weekly_amplitude, 1.0)


def generate_chronics(grid: Grid, horizon: int, seed: int,
                      config: ChronicsConfig | None = None) -> Chronics:
    """Deterministically generate a Chronics for the grid.

    Demand is base * daily sinusoid * weekly factor * lognormal noise. Solar
    follows a clipped diurnal sine, wind an AR(1) process. Scheduled fossil
    dispatch covers expected demand net of renewables, allocated in proportion
    to capacity with the largest unit absorbing the rounding residual.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    cfg = config or ChronicsConfig()
    rng = np.random.default_rng(seed)
    t = np.arange(horizon)

    shape = _daily_factor(t, cfg) * _weekly_factor(t, cfg)
    base = np.array([l.p_nominal for l in grid.loads]) * cfg.demand_scale
    demand = base[None, :] * shape[:, None]
    if cfg.noise_sigma > 0:
        noise = rng.lognormal(mean=0.0, sigma=cfg.noise_sigma, size=demand.shape)
        demand = demand * noise
    demand = np.maximum(demand, 0.0)

    ren_ids = grid.renewable_ids()
    renewable = np.zeros((horizon, len(ren_ids)))
    if cfg.renewable_enabled:
        for j, gid in enumerate(ren_ids):
            gen = grid.generators[gid]
            # AR(1) wind-style availability around a mean fraction of capacity
            level = cfg.wind_mean_fraction
            series = np.empty(horizon)
            eps = rng.normal(0.0, cfg.wind_sigma, size=horizon)
            x = level
            for k in range(horizon):
                x = level + cfg.wind_autocorr * (x - level) + eps[k]
                series[k] = x
            renewable[:, j] = np.clip(series, 0.0, 1.0) * gen.p_max

    fossil_ids = grid.fossil_ids()
    fossil = [grid.generators[i] for i in fossil_ids]
    dispatch = np.zeros((horizon, len(fossil)))
    if fossil:
        residual_demand = demand.sum(axis=1) - renewable.sum(axis=1)
        residual_demand = np.maximum(residual_demand, sum(f.p_min for f in fossil))
        cap = np.array([f.p_max for f in fossil])
        weights = cap / cap.sum()
        big = int(np.argmax(cap))  # absorbs the allocation residual
        for k, f in enumerate(fossil):
            if k == big:
                continue
            dispatch[:, k] = np.clip(residual_demand * weights[k], f.p_min, f.p_max)
        others = dispatch.sum(axis=1)
        dispatch[:, big] = np.clip(residual_demand - others,
                                   fossil[big].p_min, fossil[big].p_max)
        # soften any ramp violations; smooth demand shapes rarely trigger this
        for k, f in enumerate(fossil):
            col = dispatch[:, k]
            for step in range(1, horizon):
                lo = col[step - 1] - f.ramp_down
                hi = col[step - 1] + f.ramp_up
                if col[step] > hi:
                    col[step] = hi
                elif col[step] < lo:
                    col[step] = lo

    events: list[MaintenanceEvent] = []
    if cfg.maintenance_rate > 0:
        for line in grid.lines:
            step = 0
            while step < horizon:
                if rng.random() < cfg.maintenance_rate:
                    events.append(MaintenanceEvent(line.id, step, cfg.maintenance_duration))
                    step += cfg.maintenance_duration + 1
                else:
                    step += 1
    events.sort(key=lambda e: (e.line_id, e.start))

    return Chronics(horizon=horizon, demand=demand, renewable=renewable,
                    dispatch=dispatch, maintenance=tuple(events))


def sample_episode_start(chronics: Chronics, episode_length: int, rng: np.random.Generator) -> int:
    """Uniform start index such that the episode fits inside the horizon."""
    if chronics.horizon < episode_length:
        raise ValueError(f"chronics horizon {chronics.horizon} shorter than "
                         f"episode length {episode_length}")
    return int(rng.integers(0, chronics.horizon - episode_length + 1))


def _write_series(path: Path, arr: np.ndarray, header: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in arr:
            w.writerow([repr(float(x)) for x in row])


def _read_series(path: Path, n_cols: int) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = rows[1:]
    if not data:
        return np.zeros((0, n_cols))
    return np.array([[float(x) for x in row] for row in data])


def save_chronics(chronics: Chronics, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write_series(d / "demand.csv", chronics.demand,
                  [f"load_{i}" for i in range(chronics.demand.shape[1])])
    _write_series(d / "renewable.csv", chronics.renewable,
                  [f"ren_{i}" for i in range(chronics.renewable.shape[1])])
    _write_series(d / "dispatch.csv", chronics.dispatch,
                  [f"gen_{i}" for i in range(chronics.dispatch.shape[1])])
    with open(d / "maintenance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line_id", "start", "duration"])
        for ev in chronics.maintenance:
            w.writerow([ev.line_id, ev.start, ev.duration])
    manifest = {"format_version": FORMAT_VERSION,
                "horizon": chronics.horizon,
                "n_loads": chronics.demand.shape[1],
                "n_renewables": chronics.renewable.shape[1],
                "n_fossil": chronics.dispatch.shape[1]}
    with open(d / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_chronics(directory) -> Chronics:
    d = Path(directory)
    with open(d / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported chronics format version "
                         f"{manifest.get('format_version')}")
    demand = _read_series(d / "demand.csv", manifest["n_loads"])
    renewable = _read_series(d / "renewable.csv", manifest["n_renewables"])
    dispatch = _read_series(d / "dispatch.csv", manifest["n_fossil"])
    events = []
    with open(d / "maintenance.csv", newline="") as fh:
        for row in list(csv.reader(fh))[1:]:
            events.append(MaintenanceEvent(int(row[0]), int(row[1]), int(row[2])))
    return Chronics(horizon=manifest["horizon"], demand=demand,
                    renewable=renewable, dispatch=dispatch,
                    maintenance=tuple(events))
