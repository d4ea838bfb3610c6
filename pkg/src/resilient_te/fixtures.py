"""Bundled desk-scale fixtures.

Each fixture reconstructs a small topology whose optimal and robust values
are known in closed form; the acceptance suite pins those values.  Capacities
and link sets are part of the contract: tests elsewhere assume them.
"""

from __future__ import annotations

from .net import (
    Condition,
    FlowDemand,
    LogicalSequence,
    NetworkInstance,
    Tunnel,
    make_topology,
)


def four_tunnel_example(tunnels: str = "all") -> NetworkInstance:
    """Six-node network with four s->t tunnels, two of which share a link.

    T1 and T2 each carry 1 unit, T3 and T4 each 0.5.  With all four tunnels
    the conservative shared-link bound doubles, so reservations planned for
    k failures must survive 2k tunnel failures; with only T1..T3 the tunnels
    are disjoint.  `tunnels` selects "all" (T1..T4) or "three" (T1..T3).
    """
    topo = make_topology(
        ["s", "n1", "n2", "n3", "n4", "t"],
        [
            ("s-1", "s", "n1", 1.0),
            ("1-t", "n1", "t", 1.0),
            ("s-2", "s", "n2", 1.0),
            ("2-t", "n2", "t", 1.0),
            ("s-3", "s", "n3", 0.5),
            ("3-4", "n3", "n4", 0.5),
            ("4-t", "n4", "t", 1.0),
            ("s-4", "s", "n4", 0.5),
        ],
    )
    all_tunnels = (
        Tunnel("T1", "s", "t", ("s-1", "1-t")),
        Tunnel("T2", "s", "t", ("s-2", "2-t")),
        Tunnel("T3", "s", "t", ("s-3", "3-4", "4-t")),
        Tunnel("T4", "s", "t", ("s-4", "4-t")),
    )
    chosen = all_tunnels if tunnels == "all" else all_tunnels[:3]
    return NetworkInstance(
        topology=topo,
        demands=(FlowDemand("d0", ("s", "t"), 2.0),),
        tunnels=chosen,
    )


def parallel_example(variant: str = "tunnels") -> NetworkInstance:
    """Three parallel links then two, with one unit of s->t demand.

    variant "tunnels": the six two-link tunnels; tunnel reservations strand
    capacity whenever a link fails.  variant "ls": one tunnel per link plus
    the logical sequence s,u,t, which can re-spread traffic inside each
    segment.
    """
    topo = make_topology(
        ["s", "u", "t"],
        [
            ("e1", "s", "u", 1.0 / 3),
            ("e2", "s", "u", 1.0 / 3),
            ("e3", "s", "u", 1.0 / 3),
            ("e4", "u", "t", 1.0),
            ("e5", "u", "t", 1.0),
        ],
    )
    demand = (FlowDemand("d0", ("s", "t"), 1.0),)
    if variant == "tunnels":
        tunnels = tuple(
            Tunnel(f"T{i}{j}", "s", "t", (f"e{i}", f"e{j}"))
            for i in (1, 2, 3)
            for j in (4, 5)
        )
        return NetworkInstance(topology=topo, demands=demand, tunnels=tunnels)
    if variant == "ls":
        tunnels = tuple(
            [Tunnel(f"su{i}", "s", "u", (f"e{i}",)) for i in (1, 2, 3)]
            + [Tunnel(f"ut{j}", "u", "t", (f"e{j}",)) for j in (4, 5)]
        )
        ls = (LogicalSequence("L", "s", "t", ("s", "u", "t")),)
        return NetworkInstance(topology=topo, demands=demand, tunnels=tunnels,
                               logical_sequences=ls)
    raise ValueError(f"unknown variant {variant!r}")


def hint_example(variant: str = "tunnels") -> NetworkInstance:
    """Fan of three two-hop s->t paths plus a relay node reachable by a thin
    link, under two simultaneous failures.

    Tunnel-only reservations top out at 2/3 of the unit demand because the
    relay link s-4 is split three ways.  A sequence through the relay,
    active only while s-4 survives, recovers the full unit.

    variants: "tunnels" (six s->t tunnels), "cls" (adds the conditional
    sequence plus its segment tunnels), "ls" (unconditional sequence, with
    extra s->4 detour tunnels so the first segment survives failures).
    """
    topo = make_topology(
        ["s", "n1", "n2", "n3", "n4", "t"],
        [
            ("s-1", "s", "n1", 0.5),
            ("s-2", "s", "n2", 0.5),
            ("s-3", "s", "n3", 0.5),
            ("s-4", "s", "n4", 0.5),
            ("4-1", "n4", "n1", 0.5),
            ("4-2", "n4", "n2", 0.5),
            ("4-3", "n4", "n3", 0.5),
            ("1-t", "n1", "t", 1.0),
            ("2-t", "n2", "t", 1.0),
            ("3-t", "n3", "t", 1.0),
        ],
    )
    demand = (FlowDemand("d0", ("s", "t"), 1.0),)
    direct = [
        Tunnel("T1", "s", "t", ("s-1", "1-t")),
        Tunnel("T2", "s", "t", ("s-2", "2-t")),
        Tunnel("T3", "s", "t", ("s-3", "3-t")),
        Tunnel("T41", "s", "t", ("s-4", "4-1", "1-t")),
        Tunnel("T42", "s", "t", ("s-4", "4-2", "2-t")),
        Tunnel("T43", "s", "t", ("s-4", "4-3", "3-t")),
    ]
    if variant == "tunnels":
        return NetworkInstance(topology=topo, demands=demand, tunnels=tuple(direct))
    seg_s4 = [Tunnel("S4", "s", "n4", ("s-4",))]
    seg_4t = [
        Tunnel("F1", "n4", "t", ("4-1", "1-t")),
        Tunnel("F2", "n4", "t", ("4-2", "2-t")),
        Tunnel("F3", "n4", "t", ("4-3", "3-t")),
    ]
    if variant == "cls":
        cond = Condition("s4-alive", alive_links=frozenset({"s-4"}))
        ls = LogicalSequence("Q", "s", "t", ("s", "n4", "t"), condition="s4-alive")
        return NetworkInstance(topology=topo, demands=demand,
                               tunnels=tuple(direct + seg_s4 + seg_4t),
                               logical_sequences=(ls,), conditions=(cond,))
    if variant == "ls":
        detours = [
            Tunnel("D1", "s", "n4", ("s-1", "4-1")),
            Tunnel("D2", "s", "n4", ("s-2", "4-2")),
            Tunnel("D3", "s", "n4", ("s-3", "4-3")),
        ]
        ls = LogicalSequence("Q", "s", "t", ("s", "n4", "t"))
        return NetworkInstance(topology=topo, demands=demand,
                               tunnels=tuple(direct + seg_s4 + detours + seg_4t),
                               logical_sequences=(ls,))
    raise ValueError(f"unknown variant {variant!r}")


def flow_example() -> NetworkInstance:
    """Square A-B-C-D with a risky A-D link and two flows sharing A.

    f1 (A->C) rides A-B-C; f2 (A->D) normally rides A-D and falls back to
    A-B-C-D.  Per-scenario fair sharing caps f1 at 50% loss in the A-D
    failure scenario, although selecting critical scenarios per flow serves
    both losslessly 99% of the time.
    """
    topo = make_topology(
        ["A", "B", "C", "D"],
        [
            ("A-B", "A", "B", 1.0, 0.001),
            ("B-C", "B", "C", 1.0, 0.001),
            ("C-D", "C", "D", 1.0, 0.001),
            ("A-D", "A", "D", 1.0, 0.01),
        ],
    )
    return NetworkInstance(
        topology=topo,
        demands=(
            FlowDemand("f1", ("A", "C"), 1.0),
            FlowDemand("f2", ("A", "D"), 1.0),
        ),
        tunnels=(
            Tunnel("t1", "A", "C", ("A-B", "B-C")),
            Tunnel("t2", "A", "D", ("A-D",)),
            Tunnel("t3", "A", "D", ("A-B", "B-C", "C-D")),
        ),
    )


def cvar_topo() -> NetworkInstance:
    """Triangle where one flow is disconnected in 1% of scenarios, making its
    tail-average loss 100% regardless of routing."""
    topo = make_topology(
        ["A", "B", "C"],
        [
            ("A-B", "A", "B", 1.0, 0.01),
            ("A-C", "A", "C", 1.0, 0.01),
            ("B-C", "B", "C", 1.0, 0.01),
        ],
    )
    return NetworkInstance(
        topology=topo,
        demands=(
            FlowDemand("f1", ("A", "B"), 1.0),
            FlowDemand("f2", ("A", "C"), 1.0),
        ),
        tunnels=(
            Tunnel("t1", "A", "B", ("A-B",)),
            Tunnel("t2", "A", "C", ("A-C",)),
            Tunnel("t3", "A", "C", ("A-B", "B-C")),
        ),
    )


def realization_example(with_third_sequence: bool = False) -> NetworkInstance:
    """Five single-link tunnels plus a reverse tunnel, and two nested
    sequences: A->D via C, and A->B via D.

    Adding the third sequence (D->B via A) couples the D->B and A->B rows in
    the reservation matrix so no topological order exists.
    """
    topo = make_topology(
        ["A", "B", "C", "D"],
        [
            ("A-C", "A", "C", 1.0),
            ("C-D", "C", "D", 1.0),
            ("A-D", "A", "D", 2.0),
            ("D-B", "D", "B", 1.0),
            ("A-B", "A", "B", 1.0),
        ],
    )
    demands = [FlowDemand("dAB", ("A", "B"), 1.0)]
    if with_third_sequence:
        demands.append(FlowDemand("dDB", ("D", "B"), 1.0))
    tunnels = (
        Tunnel("T1", "A", "C", ("A-C",)),
        Tunnel("T2", "C", "D", ("C-D",)),
        Tunnel("T3", "A", "D", ("A-D",)),
        Tunnel("T4", "D", "A", ("A-D",)),
        Tunnel("T5", "D", "B", ("D-B",)),
        Tunnel("T6", "A", "B", ("A-B",)),
    )
    sequences = [
        LogicalSequence("L1", "A", "D", ("A", "C", "D")),
        LogicalSequence("L2", "A", "B", ("A", "D", "B")),
    ]
    if with_third_sequence:
        sequences.append(LogicalSequence("L3", "D", "B", ("D", "A", "B")))
    return NetworkInstance(topology=topo, demands=tuple(demands), tunnels=tunnels,
                           logical_sequences=tuple(sequences))
