"""Instance generators: gravity-model demands, near-disjoint tunnel
selection, and splitting links into independently failing halves."""

from __future__ import annotations

import heapq

import numpy as np

from .net import (
    EMPTY_SCENARIO,
    FlowDemand,
    Link,
    NetworkInstance,
    Topology,
    Tunnel,
)
from .oracle import solve_mcf


def _adjacency(topo: Topology) -> dict[str, list[tuple[str, str]]]:
    adj: dict[str, list[tuple[str, str]]] = {n: [] for n in topo.nodes}
    for ln in topo.links:
        u, v = ln.ends
        adj[u].append((v, ln.id))
        adj[v].append((u, ln.id))
    for n in adj:
        adj[n].sort()
    return adj


def is_connected(topo: Topology) -> bool:
    nodes = sorted(topo.nodes)
    if not nodes:
        return True
    adj = _adjacency(topo)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for nxt, _ in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(topo.nodes)


def generate_gravity_demands(topo: Topology, mlu_range: tuple[float, float] = (0.5, 0.7),
                             seed: int = 0, weights: dict[str, float] | None = None,
                             ) -> tuple[FlowDemand, ...]:
    """Demands proportional to node weight products (degree by default),
    scaled so the failure-free network sits at a target utilization.

    The most-congested-link utilization of the scaled matrix is the inverse
    of the optimal demand scale, so scaling demands by target/scale lands
    the baseline inside `mlu_range`.
    """
    if not is_connected(topo):
        raise ValueError("gravity demands require a connected topology")
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = {n: 0.0 for n in topo.nodes}
        for ln in topo.links:
            u, v = ln.ends
            weights[u] += 1.0
            weights[v] += 1.0
    nodes = sorted(topo.nodes)
    raw = []
    for i, s in enumerate(nodes):
        for t in nodes:
            if s != t:
                raw.append(FlowDemand(f"g::{s}>{t}", (s, t), weights[s] * weights[t]))
    probe = NetworkInstance(topology=topo, demands=tuple(raw))
    base = solve_mcf(probe, EMPTY_SCENARIO, "demand_scale")
    scale = next(iter(base.satisfied.values()))
    if scale <= 0:
        raise ValueError("gravity probe demands cannot be routed")
    target_mlu = float(rng.uniform(*mlu_range))
    factor = scale * target_mlu
    return tuple(
        FlowDemand(d.flow_id, d.pair, d.demand * factor) for d in raw)


def shortest_path(topo: Topology, src: str, dst: str,
                  removed: set[str] = frozenset(),
                  overlap_penalty: dict[str, int] | None = None,
                  ) -> tuple[tuple[str, ...], tuple[str, ...]] | None:
    """Deterministic shortest path by (penalty, hops, node sequence);
    returns (link ids, node sequence) or None."""
    adj = _adjacency(topo)
    penalty = overlap_penalty or {}
    heap = [(0, 0, (src,), ())]
    best: dict[str, tuple] = {}
    while heap:
        pen, hops, nodes, links = heapq.heappop(heap)
        cur = nodes[-1]
        key = (pen, hops, nodes)
        if cur in best and best[cur] <= key:
            continue
        best[cur] = key
        if cur == dst:
            return links, nodes
        for nxt, lid in adj[cur]:
            if lid in removed or nxt in nodes:
                continue
            heapq.heappush(heap, (pen + penalty.get(lid, 0), hops + 1,
                                  nodes + (nxt,), links + (lid,)))
    return None


def select_tunnels(topo: Topology, pair: tuple[str, str], count: int,
                   id_prefix: str | None = None) -> tuple[Tunnel, ...]:
    """Up to `count` tunnels, as link-disjoint as possible, shorter first.

    Iterative shortest paths on a residual graph with used links removed;
    once disjointness is exhausted, paths minimize overlap with links
    already used, then hops, then lexicographic node order.  Disconnected
    pairs yield an empty tuple.
    """
    src, dst = pair
    prefix = id_prefix if id_prefix is not None else f"tn::{src}>{dst}"
    used: set[str] = set()
    chosen: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
    while len(chosen) < count:
        found = shortest_path(topo, src, dst, removed=used)
        if found is None:
            penalty = {lid: 1 for lid in used}
            found = shortest_path(topo, src, dst, overlap_penalty=penalty)
        if found is None or found[0] in [c[0] for c in chosen]:
            break
        chosen.append(found)
        used |= set(found[0])
    return tuple(
        Tunnel(f"{prefix}::{i}", src, dst, links) for i, (links, _) in enumerate(chosen))


def split_sublinks(topo: Topology, instance: NetworkInstance | None = None,
                   ) -> Topology | NetworkInstance:
    """Each link becomes two half-capacity sub-links failing independently.

    Tunnels referencing an original link are rewritten onto sub-link "a" by
    convention; failure probabilities carry over to both halves.
    """
    links = []
    for ln in topo.links:
        for suffix in ("a", "b"):
            links.append(Link(f"{ln.id}::{suffix}", ln.ends, ln.capacity / 2, ln.fail_prob))
    new_topo = Topology(nodes=topo.nodes, links=tuple(links))
    if instance is None:
        return new_topo
    tunnels = tuple(
        Tunnel(t.id, t.src, t.dst, tuple(f"{lid}::a" for lid in t.path))
        for t in instance.tunnels)
    return NetworkInstance(
        topology=new_topo, demands=instance.demands, tunnels=tunnels,
        logical_sequences=instance.logical_sequences, conditions=instance.conditions)
