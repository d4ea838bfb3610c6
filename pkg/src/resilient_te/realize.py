"""Turning a reservation plan into concrete per-scenario routing.

For a given failure scenario the plan's live reservations form a square
matrix over the node pairs of interest: diagonals hold each pair's available
reservation, off-diagonals the sequence loads a pair must carry for others.
The matrix is weakly-chained diagonally dominant, hence invertible, and its
solution gives the fraction of each reservation actually used.  When active
sequences admit a topological order the same fractions emerge from purely
local proportional splitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import LogicalSequence, NetworkInstance, Scenario, Tunnel, sequence_active, tunnel_alive
from .robust import LogicalFlowPlan, ReservationPlan

Pair = tuple[str, str]

RESIDUAL_TOL = 1e-9


class MatrixNotWcddError(RuntimeError):
    """The reservation matrix is not weakly-chained diagonally dominant,
    which signals an invalid plan for this scenario rather than a solver
    failure."""


class NotTopologicallySortedError(RuntimeError):
    def __init__(self, cycle: list[Pair]):
        super().__init__(f"active sequences contain the pair cycle {cycle}")
        self.cycle = cycle


@dataclass
class ReservationMatrix:
    pairs: list[Pair]
    matrix: np.ndarray
    demand: np.ndarray
    demand_by_dest: dict[str, np.ndarray]
    live_tunnels: dict[Pair, list[Tunnel]]
    active_sequences: dict[Pair, list[LogicalSequence]]
    reservation: ReservationPlan

    def index(self, pair: Pair) -> int:
        return self.pairs.index(pair)


@dataclass
class ScenarioRouting:
    scenario: Scenario
    #: flow[(tunnel_id, destination)] = traffic toward that destination
    flow: dict[tuple[str, str], float]
    delivered: dict[Pair, float]
    utilization: dict[Pair, float]


def _live_structures(plan: ReservationPlan, instance: NetworkInstance, scenario: Scenario):
    topo = instance.topology
    live: dict[Pair, list[Tunnel]] = {}
    for t in instance.tunnels:
        if plan.tunnel_reservation.get(t.id, 0.0) <= 0.0:
            continue
        if tunnel_alive(topo, t, scenario):
            live.setdefault((t.src, t.dst), []).append(t)
    active: dict[Pair, list[LogicalSequence]] = {}
    for q in instance.logical_sequences:
        if plan.ls_reservation.get(q.id, 0.0) <= 0.0:
            continue
        if sequence_active(instance, q, scenario):
            active.setdefault((q.src, q.dst), []).append(q)
    return live, active


def _pairs_of_interest(plan: ReservationPlan, instance: NetworkInstance,
                       active: dict[Pair, list[LogicalSequence]]) -> list[Pair]:
    """Closure: a pair matters if it has positive scaled demand, or carries a
    positive active sequence for a pair that matters."""
    interest: set[Pair] = set()
    frontier = [pair for pair in plan.pair_scale
                if plan.scaled_demand(instance, pair) > 0]
    interest.update(frontier)
    while frontier:
        nxt = []
        for pair in frontier:
            for q in active.get(pair, []):
                for seg in q.segments:
                    if seg not in interest:
                        interest.add(seg)
                        nxt.append(seg)
        frontier = nxt
    return sorted(interest)


def build_reservation_matrix(plan: ReservationPlan, instance: NetworkInstance,
                             scenario: Scenario) -> ReservationMatrix:
    live, active = _live_structures(plan, instance, scenario)
    pairs = _pairs_of_interest(plan, instance, active)
    n = len(pairs)
    idx = {pair: i for i, pair in enumerate(pairs)}
    M = np.zeros((n, n))
    for i, pair in enumerate(pairs):
        M[i, i] = sum(plan.tunnel_reservation[t.id] for t in live.get(pair, []))
        M[i, i] += sum(plan.ls_reservation[q.id] for q in active.get(pair, []))
    for pair, qs in active.items():
        if pair not in idx:
            continue
        j = idx[pair]
        for q in qs:
            b = plan.ls_reservation[q.id]
            for seg in q.segments:
                if seg in idx:
                    M[idx[seg], j] -= b
    D = np.zeros(n)
    dests: dict[str, np.ndarray] = {}
    for pair in pairs:
        sd = plan.scaled_demand(instance, pair)
        if sd > 0:
            D[idx[pair]] = sd
            vec = dests.setdefault(pair[1], np.zeros(n))
            vec[idx[pair]] = sd
    return ReservationMatrix(pairs, M, D, dests, live, active, plan)


def _check_wcdd(M: np.ndarray, tol: float = 1e-9) -> None:
    n = M.shape[0]
    if n == 0:
        return
    if np.any(np.diag(M) < -tol):
        raise MatrixNotWcddError("negative diagonal entry")
    off = M - np.diag(np.diag(M))
    if np.any(off > tol):
        raise MatrixNotWcddError("positive off-diagonal entry")
    surplus = M.sum(axis=1)
    if np.any(surplus < -tol):
        raise MatrixNotWcddError("row with deficit reservation")
    # Every weakly dominant row must chain, via nonzero couplings, to a
    # strictly dominant one.
    strict = set(np.flatnonzero(surplus > tol))
    reach = set(strict)
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if i in reach:
                continue
            for j in range(n):
                if j != i and abs(M[i, j]) > tol and j in reach:
                    reach.add(i)
                    changed = True
                    break
    if len(reach) != n:
        raise MatrixNotWcddError("weakly dominant rows do not chain to a strict one")


def gaussian_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting; rhs may be a matrix."""
    A = M.astype(float).copy()
    B = rhs.astype(float).copy()
    if B.ndim == 1:
        B = B[:, None]
        squeeze = True
    else:
        squeeze = False
    n = A.shape[0]
    perm = list(range(n))
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[pivot, col]) < 1e-14:
            raise MatrixNotWcddError("singular reservation matrix")
        if pivot != col:
            A[[col, pivot]] = A[[pivot, col]]
            B[[col, pivot]] = B[[pivot, col]]
        factors = A[col + 1:, col] / A[col, col]
        A[col + 1:, col:] -= np.outer(factors, A[col, col:])
        B[col + 1:] -= np.outer(factors, B[col])
    X = np.zeros_like(B)
    for row in range(n - 1, -1, -1):
        X[row] = (B[row] - A[row, row + 1:] @ X[row + 1:]) / A[row, row]
    return X[:, 0] if squeeze else X


def jacobi_solve(M: np.ndarray, rhs: np.ndarray, max_iter: int = 100_000,
                 tol: float = 1e-12) -> np.ndarray:
    """Jacobi iteration; converges because the matrix is WCDD."""
    d = np.diag(M)
    if np.any(np.abs(d) < 1e-14):
        raise MatrixNotWcddError("zero diagonal entry")
    R = M - np.diag(d)
    x = np.zeros_like(rhs, dtype=float)
    for _ in range(max_iter):
        nxt = (rhs - R @ x) / d
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


def solve_reservation_system(matrix: ReservationMatrix, method: str = "direct",
                             rhs: np.ndarray | None = None) -> dict[Pair, float]:
    """Utilization fraction of each pair's reservation; unique and in [0, 1].

    `rhs` defaults to the full demand vector; pass a per-destination or
    per-pair demand vector to apportion utilization.
    """
    _check_wcdd(matrix.matrix)
    if matrix.matrix.shape[0] == 0:
        return {}
    demand = matrix.demand if rhs is None else rhs
    solver = gaussian_solve if method == "direct" else jacobi_solve
    U = solver(matrix.matrix, demand)
    residual = np.max(np.abs(matrix.matrix @ U - demand)) if U.size else 0.0
    scale = 1.0 + float(np.linalg.norm(demand))
    if residual > RESIDUAL_TOL * scale:
        raise MatrixNotWcddError(f"linear system residual {residual:.3e}")
    if np.any(U < -1e-7) or np.any(U > 1 + 1e-7):
        raise MatrixNotWcddError("utilization fraction escaped [0, 1]")
    return {pair: float(U[i]) for i, pair in enumerate(matrix.pairs)}


def _cancel_cycles(arc_flow: dict[Pair, float], tol: float = 1e-12) -> dict[Pair, float]:
    """Remove directed cycles by subtracting the cycle's bottleneck flow."""
    flows = {a: f for a, f in arc_flow.items() if f > tol}
    while True:
        out: dict[str, list[str]] = {}
        for (u, v) in flows:
            out.setdefault(u, []).append(v)
        cycle = _find_cycle(out)
        if cycle is None:
            return flows
        arcs = list(zip(cycle, cycle[1:] + cycle[:1]))
        c = min(flows[a] for a in arcs)
        for a in arcs:
            flows[a] -= c
            if flows[a] <= tol:
                del flows[a]


def _find_cycle(out: dict[str, list[str]]) -> list[str] | None:
    color: dict[str, int] = {}
    stack: list[str] = []

    def dfs(u: str) -> list[str] | None:
        color[u] = 1
        stack.append(u)
        for v in sorted(out.get(u, [])):
            if color.get(v, 0) == 1:
                return stack[stack.index(v):]
            if color.get(v, 0) == 0:
                found = dfs(v)
                if found:
                    return found
        stack.pop()
        color[u] = 2
        return None

    for u in sorted(out):
        if color.get(u, 0) == 0:
            found = dfs(u)
            if found:
                return found
    return None


def extract_routing(plan: ReservationPlan, instance: NetworkInstance,
                    scenario: Scenario, method: str = "direct") -> ScenarioRouting:
    """Per-destination tunnel flows realizing the plan under one scenario."""
    matrix = build_reservation_matrix(plan, instance, scenario)
    _check_wcdd(matrix.matrix)
    util = solve_reservation_system(matrix, method)
    flow: dict[tuple[str, str], float] = {}
    for dest, dvec in sorted(matrix.demand_by_dest.items()):
        if matrix.matrix.shape[0]:
            solver = gaussian_solve if method == "direct" else jacobi_solve
            Ut = solver(matrix.matrix, dvec)
        else:
            Ut = np.zeros(0)
        # Aggregate per-pair flow toward this destination, cancel cycles,
        # then prorate each pair's tunnels by the surviving share.
        pair_flow: dict[Pair, float] = {}
        reserved: dict[Pair, float] = {}
        for i, pair in enumerate(matrix.pairs):
            total_a = sum(plan.tunnel_reservation[t.id] for t in matrix.live_tunnels.get(pair, []))
            value = float(Ut[i]) * total_a
            if value > 1e-12:
                pair_flow[pair] = value
                reserved[pair] = total_a
        cleaned = _cancel_cycles(pair_flow)
        for pair, value in cleaned.items():
            for t in matrix.live_tunnels.get(pair, []):
                share = plan.tunnel_reservation[t.id] / reserved[pair]
                flow[(t.id, dest)] = flow.get((t.id, dest), 0.0) + value * share
    delivered = {pair: plan.scaled_demand(instance, pair) for pair in plan.pair_scale}
    return ScenarioRouting(scenario, flow, delivered, util)


def routing_node_balance(instance: NetworkInstance, routing: ScenarioRouting,
                         dest: str) -> dict[str, float]:
    """Net tunnel outflow minus inflow per node for one destination."""
    balance: dict[str, float] = {}
    for (tid, d), val in routing.flow.items():
        if d != dest:
            continue
        t = next(x for x in instance.tunnels if x.id == tid)
        balance[t.src] = balance.get(t.src, 0.0) + val
        balance[t.dst] = balance.get(t.dst, 0.0) - val
    return balance


def check_topological_sort(instance: NetworkInstance, sequences: list[LogicalSequence],
                           scenario: Scenario) -> tuple[list[Pair] | None, list[Pair] | None]:
    """Order the pairs touched by active sequences so every pair precedes the
    pairs whose sequences ride on it.

    Returns (order, None) when acyclic, else (None, shortest cycle found).
    """
    active = [q for q in sequences if sequence_active(instance, q, scenario)]
    edges: dict[Pair, set[Pair]] = {}
    nodes: set[Pair] = set()
    for q in active:
        src_pair = (q.src, q.dst)
        nodes.add(src_pair)
        for seg in q.segments:
            nodes.add(seg)
            edges.setdefault(src_pair, set()).add(seg)
    cycle = _pair_cycle(nodes, edges)
    if cycle is not None:
        return None, cycle
    # Kahn over reversed edges: pairs nothing rides on come out first.
    order: list[Pair] = []
    out_count = {p: len(edges.get(p, ())) for p in nodes}
    users: dict[Pair, set[Pair]] = {}
    for src_pair, segs in edges.items():
        for seg in segs:
            users.setdefault(seg, set()).add(src_pair)
    ready = sorted(p for p in nodes if out_count[p] == 0)
    while ready:
        p = ready.pop(0)
        order.append(p)
        freed = []
        for user in users.get(p, ()):  # user rides on p
            out_count[user] -= 1
            if out_count[user] == 0:
                freed.append(user)
        ready = sorted(ready + freed)
    return order, None


def _pair_cycle(nodes: set[Pair], edges: dict[Pair, set[Pair]]) -> list[Pair] | None:
    best: list[Pair] | None = None
    for start in sorted(nodes):
        # BFS back to start gives the shortest cycle through it.
        parent: dict[Pair, Pair] = {}
        frontier = [start]
        seen = {start}
        while frontier:
            nxt = []
            for u in frontier:
                for v in sorted(edges.get(u, ())):
                    if v == start:
                        cyc = [u]
                        while cyc[-1] != start:
                            cyc.append(parent[cyc[-1]])
                        cyc.reverse()
                        if best is None or len(cyc) < len(best):
                            best = cyc
                        nxt = []
                        frontier = []
                        break
                    if v not in seen:
                        seen.add(v)
                        parent[v] = u
                        nxt.append(v)
                else:
                    continue
                break
            frontier = nxt
    return best


def proportional_routing(plan: ReservationPlan, instance: NetworkInstance,
                         scenario: Scenario) -> ScenarioRouting:
    """Local proportional splitting, valid when active sequences sort.

    Each pair splits its offered traffic (demand plus inbound sequence
    loads) across live tunnels and active sequences in proportion to their
    reservations; sequence shares become offered traffic on their segments.
    """
    order, cycle = check_topological_sort(instance, list(instance.logical_sequences), scenario)
    if cycle is not None:
        raise NotTopologicallySortedError(cycle)
    matrix = build_reservation_matrix(plan, instance, scenario)
    _check_wcdd(matrix.matrix)
    live, active = matrix.live_tunnels, matrix.active_sequences

    process: list[Pair] = [p for p in reversed(order) if p in set(matrix.pairs)]
    for pair in matrix.pairs:
        if pair not in process:
            process.append(pair)

    flow: dict[tuple[str, str], float] = {}
    util: dict[Pair, float] = {}
    # offered[(pair, dest)] accumulates traffic the pair must move toward dest.
    offered: dict[tuple[Pair, str], float] = {}
    for pair in matrix.pairs:
        sd = plan.scaled_demand(instance, pair)
        if sd > 0:
            offered[(pair, pair[1])] = offered.get((pair, pair[1]), 0.0) + sd
    for pair in process:
        reserve = sum(plan.tunnel_reservation[t.id] for t in live.get(pair, []))
        reserve += sum(plan.ls_reservation[q.id] for q in active.get(pair, []))
        total_offer = sum(v for (p, _), v in offered.items() if p == pair)
        if total_offer <= 1e-12:
            util[pair] = 0.0
            continue
        if reserve <= 1e-12:
            raise MatrixNotWcddError(f"pair {pair} offered traffic with no live reservation")
        util[pair] = total_offer / reserve
        for dest in sorted({d for (p, d) in offered if p == pair}):
            amount = offered[(pair, dest)]
            if amount <= 1e-15:
                continue
            for t in live.get(pair, []):
                flow[(t.id, dest)] = flow.get((t.id, dest), 0.0) + \
                    amount * plan.tunnel_reservation[t.id] / reserve
            for q in active.get(pair, []):
                share = amount * plan.ls_reservation[q.id] / reserve
                for seg in q.segments:
                    offered[(seg, dest)] = offered.get((seg, dest), 0.0) + share
    delivered = {pair: plan.scaled_demand(instance, pair) for pair in plan.pair_scale}
    return ScenarioRouting(scenario, flow, delivered, util)


def prune_ls(instance: NetworkInstance, sequences: list[LogicalSequence],
             scenario_family: list[Scenario]) -> list[LogicalSequence]:
    """Greedy pass in input order keeping only sequences that leave every
    scenario's active set topologically sortable."""
    kept: list[LogicalSequence] = []
    for q in sequences:
        trial = kept + [q]
        ok = True
        for sc in scenario_family:
            _, cycle = check_topological_sort(instance, trial, sc)
            if cycle is not None:
                ok = False
                break
        if ok:
            kept.append(q)
    return kept


def widest_path_decompose(flow_plan: LogicalFlowPlan, tol: float = 1e-9) -> list[LogicalSequence]:
    """One sequence per reserved logical flow: the hops of the widest
    (maximum bottleneck) path through the flow's segment loads.

    Ties prefer fewer hops, then the lexicographically smallest node
    sequence.  A reserved flow with no path violates flow balance.
    """
    import heapq

    out: list[LogicalSequence] = []
    for w in flow_plan.flows:
        b = flow_plan.reservation.get(w.id, 0.0)
        if b <= tol:
            continue
        arcs: dict[str, list[tuple[str, float]]] = {}
        for (i, j), p in flow_plan.loads_for(w.id).items():
            if p > tol:
                arcs.setdefault(i, []).append((j, p))
        s, t = w.pair
        # Lexicographic Dijkstra on (-bottleneck, hops, node sequence).
        start = (-float("inf"), 0, (s,))
        heap = [start]
        done: set[str] = set()
        best_path = None
        while heap:
            negb, hops, seq = heapq.heappop(heap)
            node = seq[-1]
            if node in done:
                continue
            done.add(node)
            if node == t:
                best_path = seq
                break
            for nxt, width in sorted(arcs.get(node, [])):
                if nxt in done or nxt in seq:
                    continue
                heapq.heappush(heap, (max(negb, -width), hops + 1, seq + (nxt,)))
        if best_path is None:
            from .robust import InternalModelError

            raise InternalModelError(
                f"flow {w.id} reserves {b} but has no segment path {s}->{t}")
        out.append(LogicalSequence(f"ls::{w.id}", s, t, best_path, condition=w.condition))
    return out
