"""Per-flow percentile loss optimization under probabilistic failures.

Each flow (or flow set) picks its own critical scenarios covering its target
probability; the routing only needs to keep the flow's loss under the
objective in those scenarios.  The joint selection-and-routing problem is a
MIP; it also decomposes into a master over selections plus one small LP per
scenario whose duals yield valid tangent cuts, since the inner optimum is
convex in the selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .failsets import SCENARIO_GUARD, ScenarioBlowupError
from .lp import LinearProgram, Solution, solve_lp, solve_mip
from .net import Link, NetworkInstance, Scenario, Topology, Tunnel, tunnel_alive

Pair = tuple[str, str]


class InfeasibleTargetError(RuntimeError):
    def __init__(self, unit_id: str, available: float, beta: float):
        super().__init__(
            f"flow {unit_id} is connected in scenarios totaling {available:.6f} < beta {beta}")
        self.unit_id = unit_id


@dataclass(frozen=True)
class ProbUnit:
    """Unit of loss accounting: one flow, or a set of flows whose loss is the
    worst across members."""

    id: str
    members: tuple[tuple[Pair, float], ...]  # (pair, demand)
    beta: float
    threshold: float = 0.0


@dataclass
class ProbabilisticInstance:
    instance: NetworkInstance
    scenarios: list[Scenario]
    beta: float
    flow_sets: dict[str, list[str]] | None = None

    def __post_init__(self) -> None:
        total = sum(sc.prob or 0.0 for sc in self.scenarios)
        if total > 1 + 1e-9:
            raise ValueError(f"scenario probabilities sum to {total} > 1")

    @property
    def probs(self) -> list[float]:
        return [sc.prob or 0.0 for sc in self.scenarios]

    @property
    def units(self) -> list[ProbUnit]:
        demands = {d.flow_id: d for d in self.instance.demands}
        if self.flow_sets:
            out = []
            for set_id, members in sorted(self.flow_sets.items()):
                entries = tuple((demands[f].pair, demands[f].demand) for f in members)
                out.append(ProbUnit(set_id, entries, self.beta))
            return out
        out = []
        for d in self.instance.demands:
            out.append(ProbUnit(
                d.flow_id, ((d.pair, d.demand),),
                d.beta if d.beta is not None else self.beta,
                d.loss_threshold if d.loss_threshold is not None else 0.0))
        return out

    def pairs(self) -> list[Pair]:
        seen: dict[Pair, None] = {}
        for u in self.units:
            for pair, _ in u.members:
                seen.setdefault(pair, None)
        return list(seen)

    def live_tunnels(self, pair: Pair, scenario: Scenario) -> list[Tunnel]:
        topo = self.instance.topology
        return [t for t in self.instance.tunnels_for(*pair)
                if tunnel_alive(topo, t, scenario)]

    def unit_connected(self, unit: ProbUnit, scenario: Scenario) -> bool:
        return all(self.live_tunnels(pair, scenario) for pair, d in unit.members if d > 0)


@dataclass
class ScenarioAlloc:
    tunnel_alloc: dict[str, float]
    unit_loss: dict[str, float]


@dataclass(frozen=True)
class CriticalSelection:
    """Binary choice of which scenarios count toward each unit's target."""

    values: dict[tuple[str, int], float]

    def __getitem__(self, key: tuple[str, int]) -> float:
        return self.values[key]

    def column(self, q: int) -> dict[str, float]:
        return {uid: v for (uid, qq), v in self.values.items() if qq == q}

    def covered_mass(self, pinst: "ProbabilisticInstance", unit_id: str) -> float:
        return sum(pinst.probs[q] for (uid, q), v in self.values.items()
                   if uid == unit_id and v >= 0.5)

    def covers(self, pinst: "ProbabilisticInstance") -> bool:
        return all(self.covered_mass(pinst, u.id) >= u.beta - 1e-9
                   for u in pinst.units)


@dataclass
class LossReport:
    flow_loss: dict[str, float]
    max_flow_pct_loss: float
    scen_loss: list[float]
    scen_pct_loss: float


@dataclass(frozen=True)
class Cut:
    """Affine lower bound on the inner optimum: const + sum coeff * z[f, q]."""

    scenario_index: int
    const: float
    coeff: dict[str, float]

    def value(self, z_col: dict[str, float]) -> float:
        return self.const + sum(c * z_col.get(f, 0.0) for f, c in self.coeff.items())


@dataclass
class BendersState:
    cuts: list[Cut] = field(default_factory=list)
    incumbent: float = math.inf
    lower_bound: float = 0.0
    iterations: int = 0
    incumbent_history: list[float] = field(default_factory=list)
    bound_history: list[float] = field(default_factory=list)
    incumbent_allocs: "list[ScenarioAlloc] | None" = None


# --------------------------------------------------------------------------
# Failure probability machinery.


def sample_link_probs(topology: Topology, shape: float = 0.8,
                      scale: float | None = None, seed: int = 0) -> Topology:
    """Attach i.i.d. Weibull failure probabilities, clamped into (0, 0.5).

    The default scale calibrates the median to about 1e-3.
    """
    if shape <= 0 or (scale is not None and scale <= 0):
        raise ValueError("Weibull parameters must be positive")
    if scale is None:
        scale = 0.001 / math.log(2) ** (1 / shape)
    rng = np.random.default_rng(seed)
    links = []
    for ln in topology.links:
        p = float(np.clip(scale * rng.weibull(shape), 1e-12, 0.5 - 1e-12))
        links.append(Link(ln.id, ln.ends, ln.capacity, fail_prob=p))
    return Topology(nodes=topology.nodes, links=tuple(links))


def enumerate_prob_scenarios(topology: Topology, cutoff: float = 1e-6) -> list[Scenario]:
    """Every failure subset whose product probability clears the cutoff,
    assuming independent link failures.  Includes the empty scenario."""
    links = sorted(topology.links, key=lambda ln: ln.id)
    for ln in links:
        if ln.fail_prob is None:
            raise ValueError(f"link {ln.id} carries no failure probability")
    base = 1.0
    for ln in links:
        base *= 1 - ln.fail_prob
    ratios = [ln.fail_prob / (1 - ln.fail_prob) for ln in links]
    # Found subsets extend one link at a time; prune with the best possible
    # completion so links with p > 0.5 stay handled correctly.
    suffix_best = [1.0] * (len(links) + 1)
    for i in range(len(links) - 1, -1, -1):
        suffix_best[i] = suffix_best[i + 1] * max(1.0, ratios[i])

    out: list[Scenario] = []

    def grow(start: int, chosen: tuple[str, ...], prob: float) -> None:
        if len(out) > SCENARIO_GUARD:
            raise ScenarioBlowupError("probabilistic scenario set exceeds guard")
        if prob >= cutoff and chosen:
            out.append(Scenario(frozenset(chosen), prob=prob))
        for i in range(start, len(links)):
            nxt = prob * ratios[i]
            if nxt * suffix_best[i + 1] < cutoff:
                continue
            grow(i + 1, chosen + (links[i].id,), nxt)

    out.append(Scenario(frozenset(), prob=base))
    grow(0, (), base)
    out.sort(key=lambda sc: sc.key())
    return out


def design_beta(pinst: ProbabilisticInstance,
                ladder: tuple[float, ...] = (0.9, 0.99, 0.999, 0.9999)) -> float:
    """Largest target on the ladder for which every unit stays connected in
    scenarios of at least that total probability."""
    best = 0.0
    for unit in pinst.units:
        mass = sum(p for sc, p in zip(pinst.scenarios, pinst.probs)
                   if pinst.unit_connected(unit, sc))
        candidate = max((b for b in ladder if b <= mass + 1e-12), default=0.0)
        best = candidate if best == 0.0 else min(best, candidate)
    return best


# --------------------------------------------------------------------------
# Percentile analysis.


def percentile_of(losses: list[float], probs: list[float], beta: float) -> float:
    """Smallest value v with total probability of {loss <= v} at least beta."""
    total = sum(probs)
    if total < beta - 1e-9:
        raise InfeasibleTargetError("<distribution>", total, beta)
    order = sorted(zip(losses, probs))
    cum = 0.0
    for loss, p in order:
        cum += p
        if cum >= beta - 1e-9:
            return loss
    return order[-1][0]


def cvar_of(losses: list[float], probs: list[float], beta: float) -> float:
    """Average loss in the worst 1-beta probability mass (at the VaR anchor)."""
    var = percentile_of(losses, probs, beta)
    excess = sum(p * max(0.0, l - var) for l, p in zip(losses, probs))
    return var + excess / (1 - beta)


def percentile_analysis(allocs: list[ScenarioAlloc], pinst: ProbabilisticInstance,
                        beta: float | None = None) -> LossReport:
    """Loss report for a routing, given per-unit losses in every scenario."""
    if len(allocs) != len(pinst.scenarios):
        raise ValueError("routing does not cover the scenario set")
    probs = pinst.probs
    flow_loss = {}
    for unit in pinst.units:
        losses = [a.unit_loss[unit.id] for a in allocs]
        target = beta if beta is not None else unit.beta
        try:
            flow_loss[unit.id] = percentile_of(losses, probs, target)
        except InfeasibleTargetError:
            raise InfeasibleTargetError(unit.id, sum(probs), target) from None
    scen_loss = [max(a.unit_loss.values()) if a.unit_loss else 0.0 for a in allocs]
    global_beta = beta if beta is not None else pinst.beta
    return LossReport(
        flow_loss=flow_loss,
        max_flow_pct_loss=max(flow_loss.values(), default=0.0),
        scen_loss=scen_loss,
        scen_pct_loss=percentile_of(scen_loss, probs, global_beta),
    )


# --------------------------------------------------------------------------
# Shared LP pieces.


def _scenario_rows(lp: LinearProgram, pinst: ProbabilisticInstance, q: int,
                   loss_var, alloc_var) -> None:
    """Demand and capacity rows for one scenario; allocation variables exist
    only for tunnels alive in that scenario."""
    sc = pinst.scenarios[q]
    units = pinst.units
    pair_demand: dict[Pair, float] = {}
    pair_loss_terms: dict[Pair, dict[str, float]] = {}
    for unit in units:
        for pair, d in unit.members:
            if d <= 0:
                continue
            pair_demand[pair] = pair_demand.get(pair, 0.0) + d
            terms = pair_loss_terms.setdefault(pair, {})
            lv = loss_var(unit.id)
            terms[lv] = terms.get(lv, 0.0) + d
    live_any: dict[str, Tunnel] = {}
    for pair in pair_demand:
        for t in pinst.live_tunnels(pair, sc):
            live_any[t.id] = t
    for t in live_any.values():
        lp.add_var(alloc_var(t.id))
    for pair, D in sorted(pair_demand.items()):
        coeffs = dict(pair_loss_terms[pair])
        for t in pinst.live_tunnels(pair, sc):
            coeffs[alloc_var(t.id)] = coeffs.get(alloc_var(t.id), 0.0) + 1.0
        lp.add_row(coeffs, ">=", D, name=f"demand:{q}:{pair[0]}>{pair[1]}")
    for ln in pinst.instance.topology.links:
        coeffs = {}
        for t in live_any.values():
            if ln.id in t.path:
                coeffs[alloc_var(t.id)] = coeffs.get(alloc_var(t.id), 0.0) + 1.0
        if coeffs:
            lp.add_row(coeffs, "<=", ln.capacity, name=f"cap:{q}:{ln.id}")


def _alloc_from(sol: Solution, pinst: ProbabilisticInstance, q: int,
                loss_var, alloc_var) -> ScenarioAlloc:
    sc = pinst.scenarios[q]
    alloc = {}
    for pair in pinst.pairs():
        for t in pinst.live_tunnels(pair, sc):
            v = sol.primal.get(alloc_var(t.id))
            if v and v > 1e-12:
                alloc[t.id] = v
    losses = {}
    for unit in pinst.units:
        losses[unit.id] = min(1.0, max(0.0, sol.value(loss_var(unit.id), 1.0)))
    return ScenarioAlloc(alloc, losses)


# --------------------------------------------------------------------------
# Direct MIP: joint critical-scenario selection and routing.


def selection_from_losses(pinst: ProbabilisticInstance,
                          allocs: list[ScenarioAlloc]) -> dict[tuple[str, int], float]:
    """Greedy per-unit critical sets for a fixed routing: lowest losses
    first, until the unit's probability target is covered."""
    selection = {}
    for u in pinst.units:
        order = sorted(range(len(pinst.scenarios)),
                       key=lambda q: (allocs[q].unit_loss[u.id], q))
        mass = 0.0
        chosen = set()
        for q in order:
            if mass >= u.beta - 1e-9:
                break
            chosen.add(q)
            mass += pinst.probs[q]
        for q in range(len(pinst.scenarios)):
            selection[(u.id, q)] = 1.0 if q in chosen else 0.0
    return selection


def _objective_value(pinst: ProbabilisticInstance, report: LossReport) -> float:
    return max((max(0.0, report.flow_loss[u.id] - u.threshold) for u in pinst.units),
               default=0.0)


def solve_direct_mip(pinst: ProbabilisticInstance, node_budget: int = 100_000,
                     ) -> tuple[list[ScenarioAlloc], dict[tuple[str, int], float], LossReport]:
    """Minimize the worst per-unit percentile loss by choosing critical
    scenarios and a per-scenario routing jointly.

    A connectivity-based warm start (route every scenario for its connected
    units, then pick each unit's best scenarios) supplies an incumbent bound
    so the search only explores strictly better selections.
    """
    units = pinst.units
    Q = range(len(pinst.scenarios))

    warm = None
    try:
        check_availability(pinst)
        z0 = connectivity_selection(pinst)
        warm_allocs = [
            benders_subproblem(pinst, q, {u.id: z0[(u.id, q)] for u in units}).alloc
            for q in Q
        ]
        warm_report = percentile_analysis(warm_allocs, pinst)
        warm = (warm_allocs, CriticalSelection(selection_from_losses(pinst, warm_allocs)),
                warm_report, _objective_value(pinst, warm_report))
    except InfeasibleTargetError:
        pass

    lp = LinearProgram(name="pct-loss-mip")
    lp.add_var("alpha")
    for u in units:
        for q in Q:
            lp.add_var(f"z::{u.id}::{q}", binary=True)
            lp.add_var(f"l::{u.id}::{q}", 0.0, 1.0)
    for q in Q:
        _scenario_rows(lp, pinst, q,
                       lambda uid, q=q: f"l::{uid}::{q}",
                       lambda tid, q=q: f"x::{q}::{tid}")
    for u in units:
        lp.add_row({f"z::{u.id}::{q}": pinst.probs[q] for q in Q}, ">=", u.beta,
                   name=f"avail:{u.id}")
        for q in Q:
            lp.add_row({"alpha": 1.0, f"l::{u.id}::{q}": -1.0, f"z::{u.id}::{q}": -1.0},
                       ">=", -1.0 - u.threshold, name=f"lossbound:{u.id}:{q}")
    lp.set_objective({"alpha": 1.0}, "min")
    cutoff = warm[3] if warm is not None else None
    sol = solve_mip(lp, node_budget=node_budget, cutoff=cutoff)
    if sol.status != "optimal":
        if warm is not None and sol.status == "infeasible":
            # nothing beats the warm start, so it is optimal
            return warm[0], warm[1], warm[2]
        raise RuntimeError(f"direct MIP reported {sol.status}")
    allocs = [
        _alloc_from(sol, pinst, q,
                    lambda uid, q=q: f"l::{uid}::{q}",
                    lambda tid, q=q: f"x::{q}::{tid}")
        for q in Q
    ]
    selection = CriticalSelection(
        {(u.id, q): round(sol.value(f"z::{u.id}::{q}")) * 1.0 for u in units for q in Q})
    report = percentile_analysis(allocs, pinst)
    if warm is not None and warm[3] < _objective_value(pinst, report) - 1e-12:
        return warm[0], warm[1], warm[2]
    return allocs, selection, report


# --------------------------------------------------------------------------
# Benders decomposition.


@dataclass
class SubproblemResult:
    alpha: float
    alloc: ScenarioAlloc
    cut: Cut


def benders_subproblem(pinst: ProbabilisticInstance, q: int,
                       z_col: dict[str, float]) -> SubproblemResult:
    """Route one scenario given which units it is critical for, and return
    the tangent cut assembled from the row duals.

    The subproblem is always feasible (drop everything, take loss one), so
    the cut exists and is tight at the proposed selection.
    """
    units = pinst.units
    lp = LinearProgram(name=f"sub:{q}")
    lp.add_var("alpha")
    for u in units:
        lp.add_var(f"l::{u.id}")
    loss_rows = {}
    cap_rows = {}
    for u in units:
        loss_rows[u.id] = lp.add_row(
            {"alpha": 1.0, f"l::{u.id}": -1.0}, ">=",
            z_col.get(u.id, 0.0) - 1.0 - u.threshold, name=f"lossbound:{u.id}")
        cap_rows[u.id] = lp.add_row({f"l::{u.id}": 1.0}, "<=", 1.0, name=f"losscap:{u.id}")
    _scenario_rows(lp, pinst, q, lambda uid: f"l::{uid}", lambda tid: f"x::{tid}")
    lp.set_objective({"alpha": 1.0}, "min")
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise RuntimeError(f"subproblem {q} reported {sol.status}")

    names = lp.row_names()
    const = 0.0
    coeff = {}
    for idx, (name, dual) in enumerate(zip(names, sol.duals)):
        if not dual:
            continue
        row_rhs = lp._rows[idx].rhs
        if name.startswith("lossbound:"):
            uid = name.split(":", 1)[1]
            coeff[uid] = coeff.get(uid, 0.0) + dual
            const += dual * (row_rhs - z_col.get(uid, 0.0))
        else:
            const += dual * row_rhs
    cut = Cut(q, const, coeff)
    alloc = _alloc_from(sol, pinst, q, lambda uid: f"l::{uid}", lambda tid: f"x::{tid}")
    return SubproblemResult(sol.objective, alloc, cut)


def connectivity_selection(pinst: ProbabilisticInstance) -> dict[tuple[str, int], float]:
    """Starting point: every scenario is critical for every unit still
    connected in it."""
    sel = {}
    for u in pinst.units:
        for q, sc in enumerate(pinst.scenarios):
            sel[(u.id, q)] = 1.0 if pinst.unit_connected(u, sc) else 0.0
    return sel


def check_availability(pinst: ProbabilisticInstance) -> None:
    for u in pinst.units:
        mass = sum(p for sc, p in zip(pinst.scenarios, pinst.probs)
                   if pinst.unit_connected(u, sc))
        if mass < u.beta - 1e-9:
            raise InfeasibleTargetError(u.id, mass, u.beta)


def benders_master(pinst: ProbabilisticInstance, cuts: list[Cut],
                   heuristics: dict | None = None,
                   node_budget: int = 100_000) -> tuple[CriticalSelection, float]:
    """Selection minimizing the cut envelope, subject to availability.

    heuristics keys: "start" (return the connectivity selection when no cuts
    exist), "hamming_limit" plus "previous" (restrict movement), "fixed"
    (mapping (unit, scenario) -> forced value).
    """
    heuristics = heuristics or {}
    check_availability(pinst)
    if not cuts and heuristics.get("start"):
        return CriticalSelection(connectivity_selection(pinst)), 0.0

    units = pinst.units
    Q = range(len(pinst.scenarios))
    fixed: dict[tuple[str, int], float] = dict(heuristics.get("fixed", {}))
    for u in units:
        for q, sc in enumerate(pinst.scenarios):
            if not pinst.unit_connected(u, sc):
                fixed[(u.id, q)] = 0.0

    lp = LinearProgram(name="master")
    lp.add_var("alpha")
    for u in units:
        for q in Q:
            v = lp.add_var(f"z::{u.id}::{q}", binary=True)
            if (u.id, q) in fixed:
                lp.set_bounds(v, fixed[(u.id, q)], fixed[(u.id, q)])
    for u in units:
        lp.add_row({f"z::{u.id}::{q}": pinst.probs[q] for q in Q}, ">=", u.beta,
                   name=f"avail:{u.id}")
    for c_idx, cut in enumerate(cuts):
        coeffs = {"alpha": 1.0}
        for uid, w in cut.coeff.items():
            coeffs[f"z::{uid}::{cut.scenario_index}"] = -w
        lp.add_row(coeffs, ">=", cut.const, name=f"cut:{c_idx}")
    previous = heuristics.get("previous")
    limit = heuristics.get("hamming_limit")
    if previous is not None and limit is not None:
        coeffs = {}
        base = 0.0
        for u in units:
            for q in Q:
                key = (u.id, q)
                if key in fixed:
                    continue
                if previous.get(key, 0.0) >= 0.5:
                    coeffs[f"z::{u.id}::{q}"] = -1.0
                    base += 1.0
                else:
                    coeffs[f"z::{u.id}::{q}"] = 1.0
        lp.add_row(coeffs, "<=", limit - base, name="hamming")
    lp.set_objective({"alpha": 1.0}, "min")
    sol = solve_mip(lp, node_budget=node_budget)
    if sol.status != "optimal":
        raise RuntimeError(f"master reported {sol.status}")
    selection = CriticalSelection({(u.id, q): round(sol.value(f"z::{u.id}::{q}")) * 1.0
                                   for u in units for q in Q})
    return selection, max(0.0, sol.objective)


def benders_run(pinst: ProbabilisticInstance, max_iterations: int = 5,
                heuristics: dict | None = None,
                ) -> tuple[list[ScenarioAlloc], LossReport, BendersState]:
    """Iterate master and per-scenario subproblems until the bound certifies
    the incumbent or the iteration budget runs out.

    Default heuristics: connectivity starting point, perfect-scenario
    pruning, and a Hamming-distance trust region around the previous
    selection (doubled whenever an iteration fails to improve).
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    heuristics = dict(heuristics or {})
    use_hamming = heuristics.get("use_hamming", True)
    prune_perfect = heuristics.get("prune_perfect", True)
    check_availability(pinst)
    units = pinst.units
    Q = range(len(pinst.scenarios))
    state = BendersState()

    z = connectivity_selection(pinst)
    # Perfect scenarios: lossless at the connectivity selection; their cuts
    # are never binding, so they are solved once and pinned.
    perfect: dict[int, ScenarioAlloc] = {}
    fixed: dict[tuple[str, int], float] = {}
    results: dict[int, SubproblemResult] = {}
    for q in Q:
        res = benders_subproblem(pinst, q, {u.id: z[(u.id, q)] for u in units})
        results[q] = res
        if prune_perfect and res.alpha <= 1e-9:
            perfect[q] = res.alloc
            for u in units:
                if pinst.unit_connected(u, pinst.scenarios[q]):
                    fixed[(u.id, q)] = 1.0

    nontrivial = [q for q in Q if q not in perfect]
    hamming = heuristics.get(
        "hamming_limit", max(1.0, 0.1 * len(units) * max(1, len(nontrivial))))

    best_allocs: list[ScenarioAlloc] | None = None
    best_report: LossReport | None = None

    def consume(iteration_z) -> None:
        nonlocal best_allocs, best_report
        for q in nontrivial:
            res = benders_subproblem(pinst, q, {u.id: iteration_z[(u.id, q)] for u in units})
            results[q] = res
            state.cuts.append(res.cut)
        allocs = [perfect[q] if q in perfect else results[q].alloc for q in Q]
        report = percentile_analysis(allocs, pinst)
        # Objective value of this routing: the worst threshold-adjusted
        # percentile, which is what the master's bound certifies.
        value = max((max(0.0, report.flow_loss[u.id] - u.threshold) for u in units),
                    default=0.0)
        state.incumbent_history.append(value)
        if value < state.incumbent - 1e-12:
            state.incumbent = value
            state.incumbent_allocs = allocs
            best_allocs, best_report = allocs, report

    consume(z)
    prev = z
    while state.iterations < max_iterations:
        state.iterations += 1
        # The certifying bound comes from the unrestricted master; the trust
        # region only shapes the next iterate.
        _, bound = benders_master(pinst, state.cuts, {"fixed": fixed})
        state.lower_bound = max(state.lower_bound, bound)
        state.bound_history.append(state.lower_bound)
        if state.lower_bound >= state.incumbent - 1e-6:
            break
        step_opts = {"fixed": fixed}
        if use_hamming:
            step_opts.update({"previous": prev, "hamming_limit": hamming})
        z = benders_master(pinst, state.cuts, step_opts)[0].values
        before = state.incumbent
        consume(z)
        if state.incumbent >= before - 1e-12:
            hamming *= 2
        prev = z
    if best_allocs is None:  # pragma: no cover - consume always runs once
        raise RuntimeError("no incumbent produced")
    return best_allocs, best_report, state


# --------------------------------------------------------------------------
# Baselines: per-scenario min-max loss, and CVaR formulations.


def solve_scenario_minmax(pinst: ProbabilisticInstance) -> list[ScenarioAlloc]:
    """Independently minimize the worst unit loss in every scenario (the
    scenario-centric baseline); every unit is treated as critical."""
    out = []
    for q in range(len(pinst.scenarios)):
        res = benders_subproblem(pinst, q, {u.id: 1.0 for u in pinst.units})
        out.append(res.alloc)
    return out


def solve_cvar(pinst: ProbabilisticInstance, variant: str = "flow_adaptive",
               ) -> tuple[list[ScenarioAlloc], LossReport, float]:
    """Minimize the worst per-unit conditional value at risk.

    flow_adaptive re-routes per scenario; flow_static shares one allocation
    across scenarios; scen_static applies CVaR to the per-scenario worst
    loss with a static allocation (the scenario-centric baseline).
    """
    if variant not in ("flow_adaptive", "flow_static", "scen_static"):
        raise ValueError(f"unknown CVaR variant {variant!r}")
    units = pinst.units
    Q = range(len(pinst.scenarios))
    probs = pinst.probs
    beta = pinst.beta
    lp = LinearProgram(name=f"cvar:{variant}")
    lp.add_var("theta", -1.0)

    static = variant in ("flow_static", "scen_static")
    if static:
        for t in pinst.instance.tunnels:
            lp.add_var(f"x::{t.id}")
        for ln in pinst.instance.topology.links:
            coeffs = {f"x::{t.id}": 1.0 for t in pinst.instance.tunnels if ln.id in t.path}
            if coeffs:
                lp.add_row(coeffs, "<=", ln.capacity, name=f"cap:{ln.id}")

    if variant == "scen_static":
        # CVaR of the per-scenario worst loss across pairs.
        pairs = pinst.pairs()
        lp.add_var("var_anchor", -1.0)
        for q in Q:
            lp.add_var(f"sl::{q}", 0.0, 1.0)
            lp.add_var(f"s::{q}")
            lp.add_row({"s::{0}".format(q): 1.0, "sl::{0}".format(q): -1.0, "var_anchor": 1.0},
                       ">=", 0.0, name=f"tail:{q}")
            for pair in pairs:
                lp.add_var(f"pl::{q}::{pair[0]}>{pair[1]}", 0.0, 1.0)
                lp.add_row({f"sl::{q}": 1.0, f"pl::{q}::{pair[0]}>{pair[1]}": -1.0},
                           ">=", 0.0, name=f"worst:{q}:{pair}")
                D = sum(d for u in units for (p2, d) in u.members if p2 == pair)
                coeffs = {f"pl::{q}::{pair[0]}>{pair[1]}": D}
                for t in pinst.live_tunnels(pair, pinst.scenarios[q]):
                    coeffs[f"x::{t.id}"] = coeffs.get(f"x::{t.id}", 0.0) + 1.0
                lp.add_row(coeffs, ">=", D, name=f"demand:{q}:{pair}")
        lp.add_row({"theta": 1.0, "var_anchor": -1.0,
                    **{f"s::{q}": -probs[q] / (1 - beta) for q in Q}}, ">=", 0.0,
                   name="cvar")
        lp.set_objective({"theta": 1.0}, "min")
        sol = solve_lp(lp)
        if sol.status != "optimal":
            raise RuntimeError(f"scen_static CVaR reported {sol.status}")
        allocs = []
        for q in Q:
            alloc = {t.id: sol.value(f"x::{t.id}") for t in pinst.instance.tunnels
                     if sol.value(f"x::{t.id}") > 1e-12}
            losses = {}
            for u in units:
                worst = 0.0
                for pair, d in u.members:
                    if d > 0:
                        worst = max(worst, sol.value(f"pl::{q}::{pair[0]}>{pair[1]}", 1.0))
                losses[u.id] = min(1.0, max(0.0, worst))
            allocs.append(ScenarioAlloc(alloc, losses))
        return allocs, percentile_analysis(allocs, pinst), float(sol.objective)

    # Per-unit CVaR variants.
    for u in units:
        lp.add_var(f"anchor::{u.id}", -1.0)
        tail = {"theta": 1.0, f"anchor::{u.id}": -1.0}
        for q in Q:
            lp.add_var(f"l::{u.id}::{q}", 0.0, 1.0)
            lp.add_var(f"s::{u.id}::{q}")
            lp.add_row({f"s::{u.id}::{q}": 1.0, f"anchor::{u.id}": 1.0,
                        f"l::{u.id}::{q}": -1.0}, ">=", 0.0, name=f"tail:{u.id}:{q}")
            tail[f"s::{u.id}::{q}"] = -probs[q] / (1 - beta)
        lp.add_row(tail, ">=", 0.0, name=f"cvar:{u.id}")
    for q in Q:
        if variant == "flow_adaptive":
            _scenario_rows(lp, pinst, q,
                           lambda uid, q=q: f"l::{uid}::{q}",
                           lambda tid, q=q: f"x::{q}::{tid}")
        else:
            sc = pinst.scenarios[q]
            pair_demand: dict[Pair, float] = {}
            pair_terms: dict[Pair, dict[str, float]] = {}
            for u in units:
                for pair, d in u.members:
                    if d <= 0:
                        continue
                    pair_demand[pair] = pair_demand.get(pair, 0.0) + d
                    terms = pair_terms.setdefault(pair, {})
                    terms[f"l::{u.id}::{q}"] = terms.get(f"l::{u.id}::{q}", 0.0) + d
            for pair, D in sorted(pair_demand.items()):
                coeffs = dict(pair_terms[pair])
                for t in pinst.live_tunnels(pair, sc):
                    coeffs[f"x::{t.id}"] = coeffs.get(f"x::{t.id}", 0.0) + 1.0
                lp.add_row(coeffs, ">=", D, name=f"demand:{q}:{pair}")
    lp.set_objective({"theta": 1.0}, "min")
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise RuntimeError(f"{variant} CVaR reported {sol.status}")
    allocs = []
    for q in Q:
        if variant == "flow_adaptive":
            allocs.append(_alloc_from(sol, pinst, q,
                                      lambda uid, q=q: f"l::{uid}::{q}",
                                      lambda tid, q=q: f"x::{q}::{tid}"))
        else:
            alloc = {t.id: sol.value(f"x::{t.id}") for t in pinst.instance.tunnels
                     if sol.value(f"x::{t.id}") > 1e-12}
            losses = {u.id: min(1.0, max(0.0, sol.value(f"l::{u.id}::{q}", 1.0)))
                      for u in units}
            allocs.append(ScenarioAlloc(alloc, losses))
    return allocs, percentile_analysis(allocs, pinst), float(sol.objective)
