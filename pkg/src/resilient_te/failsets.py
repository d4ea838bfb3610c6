"""Failure polytopes over link/tunnel/condition indicators, and their
enumerated integral counterparts.

A polytope is a set of linear rows over indicator variables, each bounded in
[0, 1].  Robust models quantify protected constraints over these sets, either
by instantiating one row per integral point (enumerate mode) or by dualizing
the relaxation (dual mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .net import (
    Condition,
    NetworkInstance,
    Scenario,
    condition_active,
    enumerate_scenarios,
    tunnel_alive,
)

SCENARIO_GUARD = 1_000_000


class ScenarioBlowupError(RuntimeError):
    """The enumerated scenario set would exceed the tractability guard."""


#: Indicator variables are identified by (kind, ref) where kind is "x" for a
#: link, "y" for a tunnel, "h" for a condition.
Indicator = tuple[str, str]


@dataclass(frozen=True)
class PolytopeRow:
    coeffs: tuple[tuple[Indicator, float], ...]
    sense: str  # "<=" or "="
    rhs: float
    tag: str = ""

    def coeff_map(self) -> dict[Indicator, float]:
        return dict(self.coeffs)


@dataclass
class FailurePolytope:
    variables: list[Indicator]
    rows: list[PolytopeRow] = field(default_factory=list)
    budget: int = 0

    def add_row(self, coeffs: dict[Indicator, float], sense: str, rhs: float, tag: str = "") -> None:
        self.rows.append(PolytopeRow(tuple(sorted(coeffs.items())), sense, rhs, tag))

    def holds(self, point: dict[Indicator, float], tol: float = 1e-9) -> bool:
        for var in self.variables:
            v = point.get(var, 0.0)
            if v < -tol or v > 1 + tol:
                return False
        for row in self.rows:
            lhs = sum(c * point.get(var, 0.0) for var, c in row.coeffs)
            if row.sense == "<=" and lhs > row.rhs + tol:
                return False
            if row.sense == "=" and abs(lhs - row.rhs) > tol:
                return False
        return True


@dataclass(frozen=True)
class TunnelFailurePattern:
    """Integral (y, h) point realized by one concrete failure scenario."""

    scenario: Scenario
    tunnel_failed: tuple[tuple[str, bool], ...]
    condition_state: tuple[tuple[str, bool], ...]

    def failed(self, tunnel_id: str) -> bool:
        return dict(self.tunnel_failed)[tunnel_id]

    def active(self, cond_id: str) -> bool:
        return dict(self.condition_state)[cond_id]

    def as_point(self) -> dict[Indicator, float]:
        point: dict[Indicator, float] = {}
        for e in self.scenario.failed_links:
            point[("x", e)] = 1.0
        for tid, dead in self.tunnel_failed:
            point[("y", tid)] = 1.0 if dead else 0.0
        for cid, active in self.condition_state:
            point[("h", cid)] = 1.0 if active else 0.0
        return point


def shared_link_bound(instance: NetworkInstance, src: str, dst: str) -> int:
    """Largest number of (src, dst) tunnels sharing any single link."""
    tunnels = instance.tunnels_for(src, dst)
    counts: dict[str, int] = {}
    for t in tunnels:
        for e in set(t.path):
            counts[e] = counts.get(e, 0) + 1
    return max(counts.values(), default=0)


def build_ffc_polytope(instance: NetworkInstance, k: int) -> FailurePolytope:
    """Per-pair budget rows: at most k * p_st of a pair's tunnels fail.

    Pairs without tunnels contribute nothing; their protected constraints
    degenerate to zero reservations downstream.
    """
    poly = FailurePolytope(variables=[("y", t.id) for t in instance.tunnels], budget=k)
    pairs: dict[tuple[str, str], list] = {}
    for t in instance.tunnels:
        pairs.setdefault((t.src, t.dst), []).append(t)
    for (s, d), tunnels in sorted(pairs.items()):
        p_st = shared_link_bound(instance, s, d)
        poly.add_row({("y", t.id): 1.0 for t in tunnels}, "<=", k * p_st, tag=f"ffc:{s}>{d}")
    return poly


def build_exact_polytope(instance: NetworkInstance, k: int) -> FailurePolytope:
    """Exact link-to-tunnel coupling under a budget of k link failures."""
    variables: list[Indicator] = [("x", ln.id) for ln in instance.topology.links]
    variables += [("y", t.id) for t in instance.tunnels]
    poly = FailurePolytope(variables=variables, budget=k)
    poly.add_row({("x", ln.id): 1.0 for ln in instance.topology.links}, "<=", float(k), tag="budget")
    for t in instance.tunnels:
        for e in t.path:
            poly.add_row({("x", e): 1.0, ("y", t.id): -1.0}, "<=", 0.0, tag=f"up:{t.id}:{e}")
        poly.add_row({("y", t.id): 1.0, **{("x", e): -1.0 for e in t.path}}, "<=", 0.0, tag=f"down:{t.id}")
    return poly


def build_hint_polytope(instance: NetworkInstance, k: int,
                        conditions: list[Condition]) -> FailurePolytope:
    """Exact polytope extended with condition indicators.

    A condition holds when its alive set survived and its dead set failed.
    The single-dead-link case is emitted as the equality h = x_e; the general
    case uses three inequality rows that pin h at integral points.
    """
    poly = build_exact_polytope(instance, k)
    for cond in conditions:
        if cond.alive_links & cond.dead_links:
            raise ValueError(f"condition {cond.id} lists a link as both alive and dead")
        h = ("h", cond.id)
        poly.variables.append(h)
        if not cond.alive_links and len(cond.dead_links) == 1:
            (e,) = cond.dead_links
            poly.add_row({h: 1.0, ("x", e): -1.0}, "=", 0.0, tag=f"hint-eq:{cond.id}")
            continue
        for e in sorted(cond.alive_links):
            poly.add_row({h: 1.0, ("x", e): 1.0}, "<=", 1.0, tag=f"hint-alive:{cond.id}:{e}")
        for e in sorted(cond.dead_links):
            poly.add_row({h: 1.0, ("x", e): -1.0}, "<=", 0.0, tag=f"hint-dead:{cond.id}:{e}")
        lower = {h: -1.0}
        rhs = -1.0
        for e in sorted(cond.alive_links):
            lower[("x", e)] = -1.0
        for e in sorted(cond.dead_links):
            lower[("x", e)] = 1.0
            rhs += 1.0
        poly.add_row(lower, "<=", rhs, tag=f"hint-floor:{cond.id}")
    return poly


def build_srlg_polytope(instance: NetworkInstance, groups: list[Condition],
                        k_groups: int) -> FailurePolytope:
    """Group-failure polytope: the budget counts failed groups, not links.

    Groups must be dead-link-only conditions.  Links inside a group fail
    exactly when the group does; links outside every group never fail.
    Overlapping groups are therefore forced to fail together.
    """
    variables: list[Indicator] = [("x", ln.id) for ln in instance.topology.links]
    variables += [("y", t.id) for t in instance.tunnels]
    variables += [("h", g.id) for g in groups]
    poly = FailurePolytope(variables=variables, budget=k_groups)
    grouped: set[str] = set()
    for g in groups:
        if g.alive_links or not g.dead_links:
            raise ValueError(f"SRLG {g.id} must be a non-empty dead-link condition")
        grouped |= set(g.dead_links)
    poly.add_row({("h", g.id): 1.0 for g in groups}, "<=", float(k_groups), tag="group-budget")
    for g in groups:
        for e in sorted(g.dead_links):
            poly.add_row({("x", e): 1.0, ("h", g.id): -1.0}, "=", 0.0, tag=f"tie:{g.id}:{e}")
    for ln in instance.topology.links:
        if ln.id not in grouped:
            poly.add_row({("x", ln.id): 1.0}, "<=", 0.0, tag=f"pinned:{ln.id}")
    for t in instance.tunnels:
        for e in t.path:
            poly.add_row({("x", e): 1.0, ("y", t.id): -1.0}, "<=", 0.0, tag=f"up:{t.id}:{e}")
        poly.add_row({("y", t.id): 1.0, **{("x", e): -1.0 for e in t.path}}, "<=", 0.0, tag=f"down:{t.id}")
    return poly


def scenario_count(num_links: int, k: int) -> int:
    k = min(k, num_links)
    return sum(math.comb(num_links, i) for i in range(k + 1))


def enumerate_patterns(instance: NetworkInstance, k: int,
                       conditions: list[Condition] | None = None) -> list[TunnelFailurePattern]:
    """One integral (y, h) point per scenario of at most k link failures.

    Distinct scenarios may induce identical patterns; both are kept so the
    originating scenario stays attached.
    """
    n = len(instance.topology.links)
    if scenario_count(n, k) > SCENARIO_GUARD:
        raise ScenarioBlowupError(
            f"{scenario_count(n, k)} scenarios for {n} links, k={k} exceeds guard {SCENARIO_GUARD}")
    conditions = conditions if conditions is not None else list(instance.conditions)
    topo = instance.topology
    out = []
    for sc in enumerate_scenarios(topo, k):
        out.append(TunnelFailurePattern(
            scenario=sc,
            tunnel_failed=tuple((t.id, not tunnel_alive(topo, t, sc)) for t in instance.tunnels),
            condition_state=tuple((c.id, condition_active(topo, c, sc)) for c in conditions),
        ))
    return out
