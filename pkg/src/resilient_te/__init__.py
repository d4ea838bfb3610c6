"""Failure-resilient traffic engineering toolkit.

Robust tunnel and logical-sequence reservations under bounded link failures,
a multi-commodity-flow benchmark, online routing realization, and per-flow
percentile-loss optimization under probabilistic failures.
"""

from .net import (
    Condition,
    FlowDemand,
    Link,
    LogicalSequence,
    NetworkInstance,
    Scenario,
    Topology,
    Tunnel,
    enumerate_scenarios,
    make_topology,
    validate_instance,
)
from .oracle import solve_mcf, worst_case_optimal
from .robust import ReservationPlan, solve_logical_flow, solve_robust

__all__ = [
    "Condition",
    "FlowDemand",
    "Link",
    "LogicalSequence",
    "NetworkInstance",
    "ReservationPlan",
    "Scenario",
    "Topology",
    "Tunnel",
    "enumerate_scenarios",
    "make_topology",
    "solve_logical_flow",
    "solve_mcf",
    "solve_robust",
    "validate_instance",
    "worst_case_optimal",
]
