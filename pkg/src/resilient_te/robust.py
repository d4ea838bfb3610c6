"""Robust reservation models over failure polytopes.

Five model families share one protected-constraint shape per node pair:
live tunnel reservations plus active sequence reservations must cover the
pair's scaled demand plus any sequence load routed through it, for every
admissible failure.  The quantifier is discharged either by enumerating
integral failure patterns or by dualizing the polytope relaxation; the dual
counterpart is conservative relative to enumeration, never optimistic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .failsets import (
    FailurePolytope,
    Indicator,
    SCENARIO_GUARD,
    ScenarioBlowupError,
    build_exact_polytope,
    build_ffc_polytope,
    build_hint_polytope,
    enumerate_patterns,
    scenario_count,
    shared_link_bound,
)
from .lp import INF, LinearProgram, Solution, solve_lp
from .net import Condition, LogicalSequence, NetworkInstance

MODELS = ("ffc", "ffc_plus", "ls", "cls", "logical_flow")
OBJECTIVES = ("demand_scale", "throughput")
MODES = ("enumerate", "dual")


class InternalModelError(RuntimeError):
    """A model that should always admit the zero plan came back infeasible."""


@dataclass(frozen=True)
class ReservationPlan:
    model: str
    mode: str
    objective_kind: str
    objective: float
    tunnel_reservation: dict[str, float]
    ls_reservation: dict[str, float]
    pair_scale: dict[tuple[str, str], float]
    designed_k: int

    def scaled_demand(self, instance: NetworkInstance, pair: tuple[str, str]) -> float:
        return self.pair_scale.get(pair, 0.0) * instance.demand_for(*pair)


@dataclass(frozen=True)
class LogicalFlow:
    id: str
    pair: tuple[str, str]
    condition: str | None


@dataclass(frozen=True)
class LogicalFlowPlan:
    flows: tuple[LogicalFlow, ...]
    reservation: dict[str, float]
    segment_load: dict[tuple[str, str, str], float]  # (flow id, i, j) -> p_w(ij)

    def loads_for(self, flow_id: str) -> dict[tuple[str, str], float]:
        return {(i, j): v for (w, i, j), v in self.segment_load.items() if w == flow_id}


# --------------------------------------------------------------------------
# Robust counterpart machinery.


@dataclass
class ProtectedConstraint:
    """base + sum_v coeff_v(x_dec) * v  for the worst v in the polytope.

    `base` maps decision variables to coefficients for the failure-free part
    (the inequality reads base >= worst-case), and `indicator_terms` maps
    each failure indicator to the decision-variable expression multiplying
    it inside the worst-case maximization.
    """

    base: dict[str, float] = field(default_factory=dict)
    indicator_terms: dict[Indicator, dict[str, float]] = field(default_factory=dict)
    label: str = ""

    def add_base(self, var: str, coef: float) -> None:
        self.base[var] = self.base.get(var, 0.0) + coef

    def add_indicator(self, ind: Indicator, var: str, coef: float) -> None:
        term = self.indicator_terms.setdefault(ind, {})
        term[var] = term.get(var, 0.0) + coef


_DUAL_SEQ = itertools.count()


def dualize_constraint(lp: LinearProgram, protected: ProtectedConstraint,
                       polytope: FailurePolytope) -> list[str]:
    """Emit the robust counterpart of one protected constraint into `lp`.

    Adds one multiplier per polytope row (nonnegative for inequality rows,
    free for equality rows), one nonnegative multiplier per indicator upper
    bound, a dual-feasibility row per indicator, and the single row bounding
    the worst case by the protected base.  Returns the new variable names.
    """
    tag = f"rc{next(_DUAL_SEQ)}"
    lam: list[str] = []
    for r_idx, row in enumerate(polytope.rows):
        name = f"{tag}:lam{r_idx}"
        if row.sense == "=":
            lp.add_var(name, -INF, INF)
        else:
            lp.add_var(name, 0.0, INF)
        lam.append(name)
    mu: dict[Indicator, str] = {}
    for ind in polytope.variables:
        name = f"{tag}:mu:{ind[0]}:{ind[1]}"
        lp.add_var(name, 0.0, INF)
        mu[ind] = name

    columns: dict[Indicator, list[tuple[int, float]]] = {v: [] for v in polytope.variables}
    for r_idx, row in enumerate(polytope.rows):
        for ind, coef in row.coeffs:
            columns[ind].append((r_idx, coef))

    for ind in polytope.variables:
        coeffs: dict[str, float] = {}
        for r_idx, coef in columns[ind]:
            coeffs[lam[r_idx]] = coeffs.get(lam[r_idx], 0.0) + coef
        coeffs[mu[ind]] = coeffs.get(mu[ind], 0.0) + 1.0
        for var, coef in protected.indicator_terms.get(ind, {}).items():
            coeffs[var] = coeffs.get(var, 0.0) - coef
        lp.add_row(coeffs, ">=", 0.0, name=f"{tag}:feas:{ind[0]}:{ind[1]}")

    bound: dict[str, float] = dict(protected.base)
    for r_idx, row in enumerate(polytope.rows):
        bound[lam[r_idx]] = bound.get(lam[r_idx], 0.0) - row.rhs
    for ind in polytope.variables:
        bound[mu[ind]] = bound.get(mu[ind], 0.0) - 1.0
    lp.add_row(bound, ">=", 0.0, name=f"{tag}:bound:{protected.label}")
    return lam + list(mu.values())


def _enumerate_rows(lp: LinearProgram, protected: ProtectedConstraint,
                    points: list[dict[Indicator, float]], label: str) -> None:
    for idx, point in enumerate(points):
        coeffs = dict(protected.base)
        for ind, term in protected.indicator_terms.items():
            v = point.get(ind, 0.0)
            if v:
                for var, coef in term.items():
                    coeffs[var] = coeffs.get(var, 0.0) - coef * v
        lp.add_row(coeffs, ">=", 0.0, name=f"en:{label}:{idx}")


def _ffc_worst_points(instance: NetworkInstance, pair: tuple[str, str],
                      k: int) -> list[dict[Indicator, float]]:
    """Maximal integral points of the per-pair tunnel-failure budget.

    Smaller failure sets are dominated row-wise, so only subsets of size
    exactly min(k * p_st, |T|) need rows.
    """
    tunnels = instance.tunnels_for(*pair)
    p_st = shared_link_bound(instance, *pair)
    fail = min(k * p_st, len(tunnels))
    if scenario_count(len(tunnels), fail) > SCENARIO_GUARD:
        raise ScenarioBlowupError("tunnel-failure combinations exceed guard")
    ids = sorted(t.id for t in tunnels)
    return [
        {("y", tid): 1.0 for tid in combo}
        for combo in itertools.combinations(ids, fail)
    ]


# --------------------------------------------------------------------------
# Model assembly.


def _protected_pairs(instance: NetworkInstance, sequences: tuple[LogicalSequence, ...]) -> list[tuple[str, str]]:
    pairs: dict[tuple[str, str], None] = {}
    for pair in instance.demand_pairs():
        pairs.setdefault(pair, None)
    for q in sequences:
        for seg in q.segments:
            pairs.setdefault(seg, None)
    return list(pairs)


def _segment_loads(sequences: tuple[LogicalSequence, ...], pair: tuple[str, str]) -> list[tuple[LogicalSequence, int]]:
    out = []
    for q in sequences:
        mult = sum(1 for seg in q.segments if seg == pair)
        if mult:
            out.append((q, mult))
    return out


def _add_capacity_rows(lp: LinearProgram, instance: NetworkInstance) -> None:
    for ln in instance.topology.links:
        coeffs = {}
        for t in instance.tunnels:
            if ln.id in t.path:
                coeffs[f"a::{t.id}"] = coeffs.get(f"a::{t.id}", 0.0) + 1.0
        if coeffs:
            lp.add_row(coeffs, "<=", ln.capacity, name=f"cap:{ln.id}")


def _add_objective(lp: LinearProgram, instance: NetworkInstance, objective: str) -> None:
    demand_pairs = instance.demand_pairs()
    if objective == "demand_scale":
        lp.add_var("scale")
        for s, t in demand_pairs:
            lp.add_row({"scale": 1.0, f"z::{s}>{t}": -1.0}, "<=", 0.0, name=f"scale:{s}>{t}")
        lp.set_objective({"scale": 1.0}, "max")
    else:
        obj = {}
        for s, t in demand_pairs:
            cap = f"tcap::{s}>{t}"
            lp.add_var(cap, 0.0, 1.0)
            lp.add_row({cap: 1.0, f"z::{s}>{t}": -1.0}, "<=", 0.0, name=f"tcap:{s}>{t}")
            obj[cap] = instance.demand_for(s, t)
        lp.set_objective(obj, "max")


def _sequence_condition(instance: NetworkInstance, q: LogicalSequence,
                        conditional: bool) -> str | None:
    if not conditional:
        return None
    return q.condition


def build_robust_lp(instance: NetworkInstance, model: str, k: int,
                    objective: str = "throughput", mode: str = "dual") -> LinearProgram:
    """Compile one robust reservation model to a linear program."""
    if model not in ("ffc", "ffc_plus", "ls", "cls"):
        raise ValueError(f"unknown model {model!r}")
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")

    use_ls = model in ("ls", "cls")
    conditional = model == "cls"
    sequences = instance.logical_sequences if use_ls else ()
    referenced = sorted({q.condition for q in sequences if q.condition is not None}) if conditional else []
    conditions = [instance.condition(c) for c in referenced]

    lp = LinearProgram(name=f"{model}:{objective}:{mode}:k={k}")
    for t in instance.tunnels:
        lp.add_var(f"a::{t.id}")
    for q in sequences:
        lp.add_var(f"b::{q.id}")
    for s, t in instance.demand_pairs():
        lp.add_var(f"z::{s}>{t}")
    _add_capacity_rows(lp, instance)
    _add_objective(lp, instance, objective)

    if model == "ffc":
        polytope = build_ffc_polytope(instance, k)
    elif model == "ffc_plus" or (use_ls and not conditions):
        polytope = build_exact_polytope(instance, k)
    else:
        polytope = build_hint_polytope(instance, k, conditions)

    if mode == "enumerate" and model != "ffc":
        patterns = enumerate_patterns(instance, k, conditions)
        points = [p.as_point() for p in patterns]

    for pair in _protected_pairs(instance, sequences):
        s, t = pair
        protected = ProtectedConstraint(label=f"{s}>{t}")
        for tun in instance.tunnels_for(s, t):
            protected.add_base(f"a::{tun.id}", 1.0)
            protected.add_indicator(("y", tun.id), f"a::{tun.id}", 1.0)
        for q in sequences:
            if (q.src, q.dst) == pair:
                cond = _sequence_condition(instance, q, conditional)
                if cond is None:
                    protected.add_base(f"b::{q.id}", 1.0)
                else:
                    protected.add_indicator(("h", cond), f"b::{q.id}", -1.0)
        for q, mult in _segment_loads(sequences, pair):
            cond = _sequence_condition(instance, q, conditional)
            if cond is None:
                protected.add_base(f"b::{q.id}", -float(mult))
            else:
                protected.add_indicator(("h", cond), f"b::{q.id}", float(mult))
        if instance.demand_for(s, t) > 0:
            protected.add_base(f"z::{s}>{t}", -instance.demand_for(s, t))

        if mode == "dual":
            dualize_constraint(lp, protected, polytope)
        elif model == "ffc":
            _enumerate_rows(lp, protected, _ffc_worst_points(instance, pair, k), protected.label)
        else:
            _enumerate_rows(lp, protected, points, protected.label)
    return lp


def solve_robust(instance: NetworkInstance, model: str, k: int,
                 objective: str = "throughput", mode: str = "dual") -> ReservationPlan:
    """Solve one robust reservation model to an optimal plan."""
    lp = build_robust_lp(instance, model, k, objective, mode)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise InternalModelError(
            f"{model} model reported {sol.status}; the zero plan is always feasible")
    return _extract_plan(instance, model, k, objective, mode, sol)


def _extract_plan(instance: NetworkInstance, model: str, k: int, objective: str,
                  mode: str, sol: Solution) -> ReservationPlan:
    a = {t.id: max(0.0, sol.value(f"a::{t.id}")) for t in instance.tunnels}
    b = {q.id: max(0.0, sol.value(f"b::{q.id}"))
         for q in instance.logical_sequences if sol.primal.get(f"b::{q.id}") is not None}
    z = {}
    for s, t in instance.demand_pairs():
        z[(s, t)] = max(0.0, sol.value(f"z::{s}>{t}"))
    return ReservationPlan(
        model=model, mode=mode, objective_kind=objective,
        objective=float(sol.objective), tunnel_reservation=a,
        ls_reservation=b, pair_scale=z, designed_k=k)


# --------------------------------------------------------------------------
# Logical flows: reservations carried by arbitrary flows over segments.


def solve_logical_flow(instance: NetworkInstance, conditions: list[Condition | None],
                       k: int, objective: str = "throughput",
                       mode: str = "dual") -> tuple[ReservationPlan, LogicalFlowPlan]:
    """Reservation model where each demand pair gets one logical flow per
    condition; flow reservations ride segment loads that obey flow balance.

    `conditions` may contain None for the unconditional base flow.  With no
    flows at all this reduces exactly to the tunnel-only model.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    named = [c for c in conditions if c is not None]
    demand_pairs = instance.demand_pairs()
    flows: list[LogicalFlow] = []
    for s, t in demand_pairs:
        for c in conditions:
            cid = c.id if c is not None else None
            wid = f"w::{s}>{t}::{cid or 'always'}"
            flows.append(LogicalFlow(wid, (s, t), cid))

    tunnel_pairs = sorted({(t.src, t.dst) for t in instance.tunnels})
    support_pairs: dict[tuple[str, str], None] = {}
    for pair in tunnel_pairs:
        support_pairs.setdefault(pair, None)
    for pair in demand_pairs:
        support_pairs.setdefault(pair, None)
    support = list(support_pairs)

    lp = LinearProgram(name=f"logical_flow:{objective}:{mode}:k={k}")
    for t in instance.tunnels:
        lp.add_var(f"a::{t.id}")
    for w in flows:
        lp.add_var(f"bw::{w.id}")
        for (i, j) in support:
            lp.add_var(f"pw::{w.id}::{i}>{j}")
    for s, t in demand_pairs:
        lp.add_var(f"z::{s}>{t}")
    _add_capacity_rows(lp, instance)
    _add_objective(lp, instance, objective)

    # Flow balance of each logical flow over the segment graph.
    nodes = sorted(instance.topology.nodes)
    for w in flows:
        s, t = w.pair
        for i in nodes:
            coeffs: dict[str, float] = {}
            for (u, v) in support:
                var = f"pw::{w.id}::{u}>{v}"
                if u == i:
                    coeffs[var] = coeffs.get(var, 0.0) + 1.0
                if v == i:
                    coeffs[var] = coeffs.get(var, 0.0) - 1.0
            if i == s:
                coeffs[f"bw::{w.id}"] = coeffs.get(f"bw::{w.id}", 0.0) - 1.0
            elif i == t:
                coeffs[f"bw::{w.id}"] = coeffs.get(f"bw::{w.id}", 0.0) + 1.0
            if coeffs:
                lp.add_row(coeffs, "=", 0.0, name=f"flowbal:{w.id}:{i}")

    polytope = build_hint_polytope(instance, k, named)
    if mode == "enumerate":
        points = [p.as_point() for p in enumerate_patterns(instance, k, named)]

    for pair in support:
        s, t = pair
        protected = ProtectedConstraint(label=f"{s}>{t}")
        for tun in instance.tunnels_for(s, t):
            protected.add_base(f"a::{tun.id}", 1.0)
            protected.add_indicator(("y", tun.id), f"a::{tun.id}", 1.0)
        for w in flows:
            avail = f"bw::{w.id}" if w.pair == pair else None
            load = f"pw::{w.id}::{s}>{t}"
            if w.condition is None:
                if avail:
                    protected.add_base(avail, 1.0)
                protected.add_base(load, -1.0)
            else:
                if avail:
                    protected.add_indicator(("h", w.condition), avail, -1.0)
                protected.add_indicator(("h", w.condition), load, 1.0)
        if instance.demand_for(s, t) > 0:
            protected.add_base(f"z::{s}>{t}", -instance.demand_for(s, t))
        if mode == "dual":
            dualize_constraint(lp, protected, polytope)
        else:
            _enumerate_rows(lp, protected, points, protected.label)

    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise InternalModelError(f"logical flow model reported {sol.status}")
    plan = _extract_plan(instance, "logical_flow", k, objective, mode, sol)
    reservation = {w.id: max(0.0, sol.value(f"bw::{w.id}")) for w in flows}
    segment_load = {}
    for w in flows:
        for (i, j) in support:
            val = sol.value(f"pw::{w.id}::{i}>{j}")
            if val > 1e-12:
                segment_load[(w.id, i, j)] = val
    flow_plan = LogicalFlowPlan(tuple(flows), reservation, segment_load)
    return plan, flow_plan
