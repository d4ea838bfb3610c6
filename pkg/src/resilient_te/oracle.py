"""Per-scenario optimal multi-commodity flow, and its worst case over all
scenarios within a failure budget.

The MCF is edge-based (not tunnel-based) so the benchmark does not depend on
any tunnel choice, with one aggregated commodity per destination.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .failsets import SCENARIO_GUARD, ScenarioBlowupError, scenario_count
from .lp import LinearProgram, solve_lp
from .net import Link, NetworkInstance, Scenario, enumerate_scenarios, make_topology


@dataclass(frozen=True)
class McfResult:
    scenario: Scenario
    objective: float
    #: flow[(dst, link_id, head_node)] = traffic toward dst crossing link_id
    #: in the direction of head_node.
    flow: dict[tuple[str, str, str], float]
    satisfied: dict[tuple[str, str], float]


def _worker_count() -> int:
    raw = os.environ.get("RESILIENT_TE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def solve_mcf(instance: NetworkInstance, scenario: Scenario, objective: str = "throughput") -> McfResult:
    """Optimal multi-commodity flow on the links surviving `scenario`.

    objective "demand_scale" maximizes the common factor by which every
    demand can be scaled; "throughput" maximizes total satisfied traffic,
    capping each pair at its full demand.
    """
    if objective not in ("demand_scale", "throughput"):
        raise ValueError(f"unknown objective {objective!r}")
    topo = instance.topology
    for e in scenario.failed_links:
        topo.link(e)
    alive = [ln for ln in topo.links if ln.id not in scenario.failed_links]
    demands: dict[tuple[str, str], float] = {}
    for d in instance.demands:
        if d.demand > 0:
            demands[d.pair] = demands.get(d.pair, 0.0) + d.demand
    dests = sorted({t for (_, t) in demands})

    lp = LinearProgram(name=f"mcf:{objective}")
    arcs = []
    for ln in alive:
        u, v = ln.ends
        arcs.append((ln.id, u, v))
        arcs.append((ln.id, v, u))
    for t in dests:
        for lid, u, v in arcs:
            lp.add_var(f"f::{t}::{lid}::{v}")
    if objective == "demand_scale":
        lp.add_var("Z")
        lp.set_objective({"Z": 1.0}, "max")
    else:
        obj = {}
        for (s, t), d in sorted(demands.items()):
            lp.add_var(f"zz::{s}>{t}", 0.0, 1.0)
            obj[f"zz::{s}>{t}"] = d
        lp.set_objective(obj, "max")

    for t in dests:
        nodes = sorted(topo.nodes - {t})
        for i in nodes:
            coeffs: dict[str, float] = {}
            for lid, u, v in arcs:
                if u == i:
                    coeffs[f"f::{t}::{lid}::{v}"] = coeffs.get(f"f::{t}::{lid}::{v}", 0.0) + 1.0
                if v == i:
                    coeffs[f"f::{t}::{lid}::{v}"] = coeffs.get(f"f::{t}::{lid}::{v}", 0.0) - 1.0
            d = demands.get((i, t), 0.0)
            if d > 0:
                scale_var = "Z" if objective == "demand_scale" else f"zz::{i}>{t}"
                coeffs[scale_var] = -d
            if coeffs:
                lp.add_row(coeffs, "=", 0.0, name=f"bal:{t}:{i}")
    for ln in alive:
        u, v = ln.ends
        coeffs = {}
        for t in dests:
            coeffs[f"f::{t}::{ln.id}::{v}"] = 1.0
            coeffs[f"f::{t}::{ln.id}::{u}"] = 1.0
        if coeffs:
            lp.add_row(coeffs, "<=", ln.capacity, name=f"cap:{ln.id}")

    if not demands:
        return McfResult(scenario, 0.0, {}, {})
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise RuntimeError(f"MCF solve unexpectedly {sol.status}")
    flow = {}
    for t in dests:
        for lid, u, v in arcs:
            val = sol.value(f"f::{t}::{lid}::{v}")
            if val > 1e-12:
                flow[(t, lid, v)] = val
    if objective == "demand_scale":
        satisfied = {pair: sol.value("Z") for pair in demands}
    else:
        satisfied = {(s, t): sol.value(f"zz::{s}>{t}") for (s, t) in demands}
    return McfResult(scenario, sol.objective, flow, satisfied)


def worst_case_optimal(instance: NetworkInstance, k: int,
                       objective: str = "throughput") -> tuple[float, Scenario]:
    """Minimum MCF objective over every scenario of at most k link failures.

    Ties pick the lexicographically smallest scenario so reductions stay
    reproducible under parallel evaluation.
    """
    n = len(instance.topology.links)
    if scenario_count(n, k) > SCENARIO_GUARD:
        raise ScenarioBlowupError(f"scenario count for k={k} exceeds guard")
    scenarios = enumerate_scenarios(instance.topology, k)
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda sc: solve_mcf(instance, sc, objective), scenarios))
    else:
        results = [solve_mcf(instance, sc, objective) for sc in scenarios]
    best_val, best_sc = None, None
    for sc, res in zip(scenarios, results):
        if best_val is None or res.objective < best_val - 1e-12 or \
           (abs(res.objective - best_val) <= 1e-12 and sc.key() < best_sc.key()):
            best_val, best_sc = res.objective, sc
    return float(best_val), best_sc


def generalized_family(p: int, n: int, m: int) -> NetworkInstance:
    """Chain of m segments: p parallel links of capacity 1/p, then n parallel
    links of capacity 1 per later segment, carrying one unit of demand
    end to end.

    Designed for a budget of n-1 failures, where the per-scenario optimum is
    1-(n-1)/p but exact tunnel reservations over all paths reach only 1/n.
    """
    if not (p >= n >= 2 and m >= 2):
        raise ValueError("generalized family requires p >= n >= 2 and m >= 2")
    nodes = [f"s{i}" for i in range(m + 1)]
    links: list[Link] = []
    per_segment: list[list[str]] = []
    seg0 = []
    for j in range(p):
        lid = f"e0_{j}"
        links.append(Link(lid, ("s0", "s1"), 1.0 / p))
        seg0.append(lid)
    per_segment.append(seg0)
    for i in range(1, m):
        seg = []
        for j in range(n):
            lid = f"e{i}_{j}"
            links.append(Link(lid, (f"s{i}", f"s{i + 1}"), 1.0))
            seg.append(lid)
        per_segment.append(seg)
    topo = make_topology(nodes, links)

    from .net import FlowDemand, Tunnel

    tunnels = []
    def build(level: int, prefix: tuple[str, ...]):
        if level == m:
            tid = "T_" + "_".join(prefix)
            tunnels.append(Tunnel(tid, "s0", f"s{m}", tuple(prefix)))
            return
        for lid in per_segment[level]:
            build(level + 1, prefix + (lid,))
    build(0, ())
    demand = FlowDemand("d0", ("s0", f"s{m}"), 1.0)
    return NetworkInstance(topology=topo, demands=(demand,), tunnels=tuple(tunnels))
