"""DC power flow over the split-busbar topology.

Busbars are numbered globally: busbar 1 of substation s is node s, busbar 2
is node s + n_subs. A busbar is in service when at least one element of a
connected line, or any injection element, is assigned to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import Grid, TopologyState

CONSERVATION_TOL = 1e-9  # MW


@dataclass(frozen=True)
class FlowSolution:
    """Result of a DC solve.

    ``flow_mw`` and ``rho`` are zero for disconnected lines; ``theta`` holds
    busbar voltage angles in radians (NaN for out-of-service busbars).
    """

    flow_mw: np.ndarray  # per line
    rho: np.ndarray  # |flow| / thermal limit, per line
    theta: np.ndarray  # per global busbar, radians
    losses_estimate: float  # MW
    feasible: bool


def line_nodes(grid: Grid, topo: TopologyState, line_id: int) -> tuple[int, int]:
    """Global busbar nodes of a line's two ends under the given topology."""
    ln = grid.lines[line_id]
    bus_or = topo.topo_vect[grid.topo_index_line_or(line_id)]
    bus_ex = topo.topo_vect[grid.topo_index_line_ex(line_id)]
    n = grid.n_subs
    return (ln.from_sub + (bus_or - 1) * n, ln.to_sub + (bus_ex - 1) * n)


def injection_nodes(grid: Grid, topo: TopologyState) -> dict[str, np.ndarray]:
    """Global busbar node of every generator, load, and storage unit."""
    n = grid.n_subs
    gen = np.array([g.sub + (topo.topo_vect[grid.topo_index_gen(g.id)] - 1) * n
                    for g in grid.generators], dtype=int)
    load = np.array([l.sub + (topo.topo_vect[grid.topo_index_load(l.id)] - 1) * n
                     for l in grid.loads], dtype=int)
    sto = np.array([s.sub + (topo.topo_vect[grid.topo_index_storage(s.id)] - 1) * n
                    for s in grid.storages], dtype=int)
    return {"gen": gen, "load": load, "storage": sto}


def in_service_nodes(grid: Grid, topo: TopologyState) -> np.ndarray:
    """Sorted global busbar nodes that carry at least one element."""
    nodes: set[int] = set()
    for line_id in range(grid.n_lines):
        if topo.line_status[line_id]:
            a, b = line_nodes(grid, topo, line_id)
            nodes.add(a)
            nodes.add(b)
    inj = injection_nodes(grid, topo)
    for arr in inj.values():
        nodes.update(int(x) for x in arr)
    return np.array(sorted(nodes), dtype=int)


def detect_islands(grid: Grid, topo: TopologyState) -> list[list[int]]:
    """Partition in-service busbars into electrically connected components.

    Components are sorted by descending size, then by smallest node id, so the
    main component is always first. Each component is a sorted node list.
    """
    nodes = in_service_nodes(grid, topo)
    parent = {int(v): int(v) for v in nodes}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for line_id in range(grid.n_lines):
        if not topo.line_status[line_id]:
            continue
        a, b = line_nodes(grid, topo, line_id)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, list[int]] = {}
    for v in nodes:
        groups.setdefault(find(int(v)), []).append(int(v))
    comps = [sorted(g) for g in groups.values()]
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def count_stranded_islands(grid: Grid, topo: TopologyState) -> int:
    """Number of non-main components that contain an injection element."""
    comps = detect_islands(grid, topo)
    if len(comps) <= 1:
        return 0
    inj = injection_nodes(grid, topo)
    inj_nodes = set()
    for arr in inj.values():
        inj_nodes.update(int(x) for x in arr)
    return sum(1 for c in comps[1:] if inj_nodes.intersection(c))


def solve_dc(grid: Grid, topo: TopologyState, injections: np.ndarray) -> FlowSolution:
    """Solve B*theta = P per island and derive line flows.

    ``injections`` is net active power in MW per global busbar (length
    2 * n_subs). Each island must be internally balanced; the lowest-numbered
    busbar of each island is the angle reference. A degenerate island (no
    usable reference equation) yields ``feasible=False`` rather than raising.
    """
    n_nodes = 2 * grid.n_subs
    injections = np.asarray(injections, dtype=float)
    if injections.shape != (n_nodes,):
        raise ValueError(f"injections must have shape ({n_nodes},), got {injections.shape}")

    theta = np.full(n_nodes, np.nan)
    comps = detect_islands(grid, topo)

    # susceptance bookkeeping per connected line
    conn = [i for i in range(grid.n_lines) if topo.line_status[i]]
    ends = {i: line_nodes(grid, topo, i) for i in conn}

    for comp in comps:
        idx = {node: k for k, node in enumerate(comp)}
        m = len(comp)
        if m == 1:
            theta[comp[0]] = 0.0
            continue
        b_mat = np.zeros((m, m))
        for i in conn:
            a, b = ends[i]
            if a not in idx or b not in idx:
                continue
            y = 1.0 / grid.lines[i].reactance
            ia, ib = idx[a], idx[b]
            b_mat[ia, ia] += y
            b_mat[ib, ib] += y
            b_mat[ia, ib] -= y
            b_mat[ib, ia] -= y
        p_pu = np.array([injections[node] for node in comp]) / grid.base_mva
        # reference: first (lowest-numbered) busbar of the island
        red = np.delete(np.delete(b_mat, 0, axis=0), 0, axis=1)
        rhs = np.delete(p_pu, 0)
        try:
            th_red = np.linalg.solve(red, rhs)
        except np.linalg.LinAlgError:
            return FlowSolution(flow_mw=np.zeros(grid.n_lines),
                                rho=np.zeros(grid.n_lines),
                                theta=theta, losses_estimate=0.0, feasible=False)
        if not np.all(np.isfinite(th_red)):
            return FlowSolution(flow_mw=np.zeros(grid.n_lines),
                                rho=np.zeros(grid.n_lines),
                                theta=theta, losses_estimate=0.0, feasible=False)
        theta[comp[0]] = 0.0
        for k, node in enumerate(comp[1:]):
            theta[node] = th_red[k]

    flow = np.zeros(grid.n_lines)
    rho = np.zeros(grid.n_lines)
    for i in conn:
        a, b = ends[i]
        flow[i] = (theta[a] - theta[b]) / grid.lines[i].reactance * grid.base_mva
        rho[i] = abs(flow[i]) / grid.lines[i].thermal_limit
    if not np.all(np.isfinite(flow)):
        return FlowSolution(flow_mw=np.zeros(grid.n_lines), rho=np.zeros(grid.n_lines),
                            theta=theta, losses_estimate=0.0, feasible=False)

    sol = FlowSolution(flow_mw=flow, rho=rho, theta=theta,
                       losses_estimate=0.0, feasible=True)
    losses = estimate_losses(grid, sol)
    return FlowSolution(flow_mw=flow, rho=rho, theta=theta,
                        losses_estimate=losses, feasible=True)


def estimate_losses(grid: Grid, solution: FlowSolution) -> float:
    """Quadratic resistive proxy: sum r * (flow/base)^2 * base, in MW."""
    total = 0.0
    for ln in grid.lines:
        f_pu = solution.flow_mw[ln.id] / grid.base_mva
        total += ln.resistance * f_pu * f_pu * grid.base_mva
    return total


def nodal_residuals(grid: Grid, topo: TopologyState, injections: np.ndarray,
                    solution: FlowSolution) -> np.ndarray:
    """Injection minus outgoing flow per in-service busbar, in MW."""
    res = injections.astype(float).copy()
    for i in range(grid.n_lines):
        if not topo.line_status[i]:
            continue
        a, b = line_nodes(grid, topo, i)
        res[a] -= solution.flow_mw[i]
        res[b] += solution.flow_mw[i]
    nodes = in_service_nodes(grid, topo)
    return res[nodes]
