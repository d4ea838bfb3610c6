import itertools

import pytest

from resilient_te.failsets import (
    ScenarioBlowupError,
    build_exact_polytope,
    build_ffc_polytope,
    build_hint_polytope,
    build_srlg_polytope,
    enumerate_patterns,
    scenario_count,
    shared_link_bound,
)
from resilient_te.fixtures import four_tunnel_example, hint_example
from resilient_te.net import Condition
from tests.conftest import random_instance


def integral_points(poly, free_vars=None):
    """Brute-force 0/1 points satisfying every row (oracle for small sets)."""
    variables = poly.variables if free_vars is None else free_vars
    for values in itertools.product((0.0, 1.0), repeat=len(variables)):
        point = dict(zip(variables, values))
        if poly.holds(point):
            yield point


def test_shared_link_bound_examples():
    inst = four_tunnel_example()
    assert shared_link_bound(inst, "s", "t") == 2  # T3 and T4 share 4-t
    assert shared_link_bound(four_tunnel_example("three"), "s", "t") == 1


def test_ffc_polytope_rows():
    inst = four_tunnel_example()
    poly = build_ffc_polytope(inst, 1)
    (row,) = poly.rows
    assert row.rhs == 2  # k * p_st
    assert set(row.coeff_map()) == {("y", t.id) for t in inst.tunnels}
    poly3 = build_ffc_polytope(four_tunnel_example("three"), 1)
    assert poly3.rows[0].rhs == 1
    single = build_ffc_polytope(four_tunnel_example("three"), 0)
    assert single.rows[0].rhs == 0


def test_exact_polytope_excludes_impossible_double_failure():
    # No single link failure kills T1 and T2 together, so that pattern must
    # violate the exact polytope even though the shared-link budget allows it.
    inst = four_tunnel_example()
    poly = build_exact_polytope(inst, 1)
    bad = {("y", "T1"): 1.0, ("y", "T2"): 1.0}
    hits = [p for p in integral_points(poly)
            if all(p.get(k, 0.0) == v for k, v in bad.items())]
    assert hits == []
    ffc = build_ffc_polytope(inst, 1)
    assert ffc.holds({("y", "T1"): 1.0, ("y", "T2"): 1.0})


def test_exact_polytope_k0_single_point():
    inst = four_tunnel_example()
    poly = build_exact_polytope(inst, 0)
    points = list(integral_points(poly))
    assert len(points) == 1
    assert all(v == 0.0 for v in points[0].values())


def test_single_link_tunnel_ties_exactly():
    inst = hint_example("cls")
    poly = build_exact_polytope(inst, 2)
    for pattern in enumerate_patterns(inst, 2):
        point = pattern.as_point()
        assert poly.holds(point)
        assert point[("y", "S4")] == point.get(("x", "s-4"), 0.0)


def test_hint_polytope_general_condition():
    inst = hint_example("cls")
    cond = Condition("mix", alive_links=frozenset({"s-1"}), dead_links=frozenset({"s-2"}))
    poly = build_hint_polytope(inst, 2, [cond])
    for pattern in enumerate_patterns(inst, 2, [cond]):
        point = pattern.as_point()
        assert poly.holds(point), pattern.scenario
        expect = "s-1" not in pattern.scenario.failed_links and \
            "s-2" in pattern.scenario.failed_links
        assert point[("h", "mix")] == (1.0 if expect else 0.0)


def test_hint_polytope_rejects_contradiction():
    inst = hint_example("cls")
    bad = Condition("bad", alive_links=frozenset({"s-1"}), dead_links=frozenset({"s-1"}))
    with pytest.raises(ValueError):
        build_hint_polytope(inst, 1, [bad])


def test_hint_single_dead_is_equality():
    inst = hint_example("cls")
    cond = Condition("d", dead_links=frozenset({"s-4"}))
    poly = build_hint_polytope(inst, 2, [cond])
    eq = [r for r in poly.rows if r.tag.startswith("hint-eq")]
    assert len(eq) == 1 and eq[0].sense == "="


def test_srlg_polytope_group_semantics():
    inst = four_tunnel_example()
    group = Condition("node4", dead_links=frozenset({"3-4", "4-t", "s-4"}))
    poly = build_srlg_polytope(inst, [group], 1)
    points = list(integral_points(poly))
    assert points
    for point in points:
        vals = {point[("x", e)] for e in group.dead_links}
        assert len(vals) == 1  # all incident links fail together
    zero = build_srlg_polytope(inst, [group], 0)
    pts = list(integral_points(zero))
    assert len(pts) == 1 and all(v == 0 for v in pts[0].values())


def test_srlg_disjoint_groups_budget():
    inst = four_tunnel_example()
    g1 = Condition("g1", dead_links=frozenset({"s-1", "1-t"}))
    g2 = Condition("g2", dead_links=frozenset({"s-2", "2-t"}))
    poly = build_srlg_polytope(inst, [g1, g2], 1)
    for point in integral_points(poly):
        both = point[("h", "g1")] and point[("h", "g2")]
        assert not both
    with pytest.raises(ValueError):
        build_srlg_polytope(inst, [Condition("empty")], 1)


def test_enumerate_patterns_counts_and_consistency():
    inst = four_tunnel_example()
    pats = enumerate_patterns(inst, 1)
    assert len(pats) == 1 + len(inst.topology.links)  # empty plus one per link
    assert len(enumerate_patterns(inst, 0)) == 1
    base = enumerate_patterns(inst, 0)[0]
    assert all(not dead for _, dead in base.tunnel_failed)
    poly = build_exact_polytope(inst, 1)
    for p in pats:
        assert poly.holds(p.as_point())


def test_pattern_guard():
    inst = random_instance(3, n_nodes=16, extra_links=15, n_pairs=1)
    links = len(inst.topology.links)
    assert scenario_count(links, links) > 10 ** 6
    with pytest.raises(ScenarioBlowupError):
        enumerate_patterns(inst, links)


def test_exact_points_satisfy_ffc_rows():
    # Scenario-induced failure patterns always satisfy the conservative
    # shared-link budget rows, on random small instances.
    for seed in range(6):
        inst = random_instance(seed, n_nodes=5, extra_links=3, n_pairs=2)
        ffc = build_ffc_polytope(inst, 1)
        for pattern in enumerate_patterns(inst, 1):
            assert ffc.holds(pattern.as_point())


def test_duplicate_patterns_keep_scenario_identity():
    inst = four_tunnel_example("three")
    pats = enumerate_patterns(inst, 1)
    # links off every tunnel produce the same all-alive pattern as the empty
    # scenario, yet each keeps its own scenario
    signatures = {}
    for p in pats:
        signatures.setdefault(p.tunnel_failed, []).append(p.scenario)
    assert any(len(v) > 1 for v in signatures.values())
