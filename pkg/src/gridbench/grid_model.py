"""Static grid model: substations, lines, injections, and switchable topology.

Every substation has two busbars. The topology vector assigns each element
(line end, generator, load, storage unit) to busbar 1 or 2; together with the
per-line connection status it fully describes the switchable state of the grid.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from itertools import product

import numpy as np

FOSSIL = "fossil"
RENEWABLE = "renewable"

DEFAULT_RESISTANCE = 0.01  # pu, used when a scenario file omits the column


class GridFormatError(ValueError):
    """Scenario file cannot be parsed (bad section, field count, or value)."""


class GridIntegrityError(ValueError):
    """Scenario file parsed but references a non-existent component."""


@dataclass(frozen=True)
class Substation:
    id: int
    name: str = ""


@dataclass(frozen=True)
class Line:
    id: int
    from_sub: int
    to_sub: int
    reactance: float  # pu
    resistance: float  # pu
    thermal_limit: float  # MW


@dataclass(frozen=True)
class Generator:
    id: int
    sub: int
    kind: str  # FOSSIL or RENEWABLE
    p_min: float
    p_max: float
    ramp_up: float  # MW per step
    ramp_down: float  # MW per step
    marginal_cost: float  # currency per MWh


@dataclass(frozen=True)
class Load:
    id: int
    sub: int
    p_nominal: float  # MW


@dataclass(frozen=True)
class Storage:
    id: int
    sub: int
    energy_capacity: float  # MWh
    p_charge_max: float  # MW
    p_discharge_max: float  # MW


@dataclass(frozen=True)
class Grid:
    """Immutable static description of a power grid scenario.

    The topology vector layout is: line origin ends (one per line), line
    extremity ends (one per line), generators, loads, storage units.
    """

    name: str
    base_mva: float
    substations: tuple[Substation, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    storages: tuple[Storage, ...]
    difficulty_levels: tuple[int, ...] = ()

    @property
    def n_subs(self) -> int:
        return len(self.substations)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_gens(self) -> int:
        return len(self.generators)

    @property
    def n_loads(self) -> int:
        return len(self.loads)

    @property
    def n_storages(self) -> int:
        return len(self.storages)

    @property
    def topo_size(self) -> int:
        return 2 * self.n_lines + self.n_gens + self.n_loads + self.n_storages

    def topo_index_line_or(self, line_id: int) -> int:
        return line_id

    def topo_index_line_ex(self, line_id: int) -> int:
        return self.n_lines + line_id

    def topo_index_gen(self, gen_id: int) -> int:
        return 2 * self.n_lines + gen_id

    def topo_index_load(self, load_id: int) -> int:
        return 2 * self.n_lines + self.n_gens + load_id

    def topo_index_storage(self, sto_id: int) -> int:
        return 2 * self.n_lines + self.n_gens + self.n_loads + sto_id

    def sub_elements(self, sub_id: int) -> tuple[int, ...]:
        """Topology-vector positions of all elements attached to a substation."""
        return self._sub_elements_map()[sub_id]

    def sub_element_counts(self) -> list[int]:
        return [len(self.sub_elements(s.id)) for s in self.substations]

    def _sub_elements_map(self) -> dict[int, tuple[int, ...]]:
        cached = getattr(self, "_sub_map_cache", None)
        if cached is not None:
            return cached
        out: dict[int, list[int]] = {s.id: [] for s in self.substations}
        for ln in self.lines:
            out[ln.from_sub].append(self.topo_index_line_or(ln.id))
            out[ln.to_sub].append(self.topo_index_line_ex(ln.id))
        for g in self.generators:
            out[g.sub].append(self.topo_index_gen(g.id))
        for ld in self.loads:
            out[ld.sub].append(self.topo_index_load(ld.id))
        for st in self.storages:
            out[st.sub].append(self.topo_index_storage(st.id))
        frozen = {k: tuple(v) for k, v in out.items()}
        object.__setattr__(self, "_sub_map_cache", frozen)
        return frozen

    def fossil_ids(self) -> list[int]:
        return [g.id for g in self.generators if g.kind == FOSSIL]

    def renewable_ids(self) -> list[int]:
        return [g.id for g in self.generators if g.kind == RENEWABLE]


@dataclass(frozen=True)
class TopologyState:
    """Busbar assignment per element plus per-line connection status.

    Value semantics: the arrays are never mutated in place; every change goes
    through :func:`apply_topology` and returns a fresh state.
    """

    topo_vect: np.ndarray  # int8, entries in {1, 2}
    line_status: np.ndarray  # bool

    def __post_init__(self):
        object.__setattr__(self, "topo_vect", np.asarray(self.topo_vect, dtype=np.int8))
        object.__setattr__(self, "line_status", np.asarray(self.line_status, dtype=bool))
        self.topo_vect.setflags(write=False)
        self.line_status.setflags(write=False)

    def copy(self) -> "TopologyState":
        return TopologyState(self.topo_vect.copy(), self.line_status.copy())

    def digest(self) -> str:
        return self.topo_vect.tobytes().hex() + ":" + np.packbits(self.line_status).tobytes().hex()

    def __eq__(self, other):
        if not isinstance(other, TopologyState):
            return NotImplemented
        return (np.array_equal(self.topo_vect, other.topo_vect)
                and np.array_equal(self.line_status, other.line_status))


def reference_topology(grid: Grid) -> TopologyState:
    """All elements on busbar 1, every line connected."""
    return TopologyState(np.ones(grid.topo_size, dtype=np.int8),
                         np.ones(grid.n_lines, dtype=bool))


@dataclass(frozen=True)
class LineSetChange:
    """Set the connection status of one line."""
    line_id: int
    connected: bool


@dataclass(frozen=True)
class BusAssignChange:
    """Reassign all elements of one substation to the given busbars."""
    sub_id: int
    assignment: tuple[int, ...]  # one entry in {1, 2} per substation element


TopologyChange = LineSetChange | BusAssignChange


def apply_topology(grid: Grid, state: TopologyState, change: TopologyChange | None) -> TopologyState:
    """Return a new TopologyState with the change applied; input untouched."""
    if change is None:
        return state
    if isinstance(change, LineSetChange):
        if not 0 <= change.line_id < grid.n_lines:
            raise GridIntegrityError(f"unknown line id {change.line_id}")
        status = state.line_status.copy()
        status[change.line_id] = change.connected
        return TopologyState(state.topo_vect.copy(), status)
    if isinstance(change, BusAssignChange):
        if change.sub_id not in {s.id for s in grid.substations}:
            raise GridIntegrityError(f"unknown substation id {change.sub_id}")
        positions = grid.sub_elements(change.sub_id)
        if len(change.assignment) != len(positions):
            raise GridIntegrityError(
                f"substation {change.sub_id} has {len(positions)} elements, "
                f"assignment has {len(change.assignment)}")
        if any(b not in (1, 2) for b in change.assignment):
            raise GridIntegrityError(f"busbar values must be 1 or 2, got {change.assignment}")
        vect = state.topo_vect.copy()
        for pos, bus in zip(positions, change.assignment):
            vect[pos] = bus
        return TopologyState(vect, state.line_status.copy())
    raise TypeError(f"unsupported change type {type(change).__name__}")


def bus_split_count(k: int) -> int:
    """Number of canonical two-busbar configurations of a k-element substation.

    Busbar labels are interchangeable, so the first element is pinned to bar 1
    and the all-on-one-bar configuration is excluded: 2^(k-1) - 1.
    """
    if k < 0:
        raise ValueError(f"element count must be non-negative, got {k}")
    if k <= 1:
        return 0
    return 2 ** (k - 1) - 1


def enumerate_bus_splits(k: int) -> list[tuple[int, ...]]:
    """All canonical busbar assignments of a k-element substation.

    First element fixed to bar 1, all-on-bar-1 excluded; deterministic order.
    """
    if k <= 1:
        return []
    out = []
    for rest in product((1, 2), repeat=k - 1):
        if all(b == 1 for b in rest):
            continue
        out.append((1,) + rest)
    return out


def hamming_distance(a: TopologyState, b: TopologyState) -> int:
    return int(np.sum(a.topo_vect != b.topo_vect)) + int(np.sum(a.line_status != b.line_status))


def _parse_fields(section: str, key: str, raw: str, n_min: int, n_max: int) -> list[str]:
    parts = [p.strip() for p in raw.split(",")]
    if not n_min <= len(parts) <= n_max:
        raise GridFormatError(
            f"[{section}] entry '{key}': expected {n_min}"
            + (f"-{n_max}" if n_max != n_min else "")
            + f" comma-separated fields, got {len(parts)}")
    return parts


def _to_float(section: str, key: str, value: str, field_name: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise GridFormatError(f"[{section}] entry '{key}': field '{field_name}' "
                              f"is not a number: {value!r}") from None


def load_grid(path) -> Grid:
    """Parse a scenario file (see docs/scenario_format.md) into a Grid."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(str(path))
    if not read:
        raise GridFormatError(f"cannot read scenario file {path}")
    if "meta" not in cp:
        raise GridFormatError("missing [meta] section")
    meta = cp["meta"]
    if "version" not in meta:
        raise GridFormatError("[meta] missing 'version' field")
    name = meta.get("name", "unnamed")
    base_mva = float(meta.get("base_mva", "100"))

    subs = []
    for key, raw in cp["substations"].items() if "substations" in cp else []:
        sub_name = raw.strip()
        subs.append(Substation(id=int(key), name=sub_name))
    subs.sort(key=lambda s: s.id)
    if not subs:
        raise GridIntegrityError("scenario declares no substations")
    sub_ids = {s.id for s in subs}

    lines = []
    for key, raw in (cp["lines"].items() if "lines" in cp else []):
        f = _parse_fields("lines", key, raw, 4, 5)
        resistance = _to_float("lines", key, f[3], "resistance") if len(f) == 5 else DEFAULT_RESISTANCE
        limit_field = f[4] if len(f) == 5 else f[3]
        line = Line(id=int(key),
                    from_sub=int(f[0]), to_sub=int(f[1]),
                    reactance=_to_float("lines", key, f[2], "reactance"),
                    resistance=resistance,
                    thermal_limit=_to_float("lines", key, limit_field, "thermal_limit"))
        for end in (line.from_sub, line.to_sub):
            if end not in sub_ids:
                raise GridIntegrityError(
                    f"line {line.id} references substation {end}, "
                    f"which does not exist ({len(subs)} substations declared)")
        if line.thermal_limit <= 0:
            raise GridFormatError(f"[lines] entry '{key}': thermal_limit must be > 0")
        if line.reactance <= 0:
            raise GridFormatError(f"[lines] entry '{key}': reactance must be > 0")
        lines.append(line)
    lines.sort(key=lambda l: l.id)

    gens = []
    for key, raw in (cp["generators"].items() if "generators" in cp else []):
        f = _parse_fields("generators", key, raw, 7, 7)
        gen = Generator(id=int(key), sub=int(f[0]), kind=f[1],
                        p_min=_to_float("generators", key, f[2], "p_min"),
                        p_max=_to_float("generators", key, f[3], "p_max"),
                        ramp_up=_to_float("generators", key, f[4], "ramp_up"),
                        ramp_down=_to_float("generators", key, f[5], "ramp_down"),
                        marginal_cost=_to_float("generators", key, f[6], "marginal_cost"))
        if gen.kind not in (FOSSIL, RENEWABLE):
            raise GridFormatError(f"[generators] entry '{key}': kind must be "
                                  f"'{FOSSIL}' or '{RENEWABLE}', got {gen.kind!r}")
        if gen.sub not in sub_ids:
            raise GridIntegrityError(f"generator {gen.id} references substation {gen.sub}, "
                                     "which does not exist")
        if gen.p_min > gen.p_max:
            raise GridFormatError(f"[generators] entry '{key}': p_min > p_max")
        if gen.ramp_up < 0 or gen.ramp_down < 0:
            raise GridFormatError(f"[generators] entry '{key}': ramps must be >= 0")
        gens.append(gen)
    gens.sort(key=lambda g: g.id)

    loads = []
    for key, raw in (cp["loads"].items() if "loads" in cp else []):
        f = _parse_fields("loads", key, raw, 2, 2)
        ld = Load(id=int(key), sub=int(f[0]),
                  p_nominal=_to_float("loads", key, f[1], "p_nominal"))
        if ld.sub not in sub_ids:
            raise GridIntegrityError(f"load {ld.id} references substation {ld.sub}, "
                                     "which does not exist")
        loads.append(ld)
    loads.sort(key=lambda l: l.id)

    storages = []
    for key, raw in (cp["storages"].items() if "storages" in cp else []):
        f = _parse_fields("storages", key, raw, 4, 4)
        st = Storage(id=int(key), sub=int(f[0]),
                     energy_capacity=_to_float("storages", key, f[1], "energy_capacity"),
                     p_charge_max=_to_float("storages", key, f[2], "p_charge_max"),
                     p_discharge_max=_to_float("storages", key, f[3], "p_discharge_max"))
        if st.sub not in sub_ids:
            raise GridIntegrityError(f"storage {st.id} references substation {st.sub}, "
                                     "which does not exist")
        if min(st.energy_capacity, st.p_charge_max, st.p_discharge_max) < 0:
            raise GridFormatError(f"[storages] entry '{key}': bounds must be >= 0")
        storages.append(st)
    storages.sort(key=lambda s: s.id)

    levels: tuple[int, ...] = ()
    if "difficulty" in cp and "levels" in cp["difficulty"]:
        levels = tuple(int(x) for x in cp["difficulty"]["levels"].split(","))

    return Grid(name=name, base_mva=base_mva,
                substations=tuple(subs), lines=tuple(lines),
                generators=tuple(gens), loads=tuple(loads),
                storages=tuple(storages), difficulty_levels=levels)
