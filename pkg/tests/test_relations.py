from __future__ import annotations

import random
from decimal import Decimal

import pytest

from critmatrix.errors import (
    DuplicateRelation,
    EndpointNotFound,
    KindMismatch,
    SelfLoop,
    UnknownFault,
)
from critmatrix.model import ContentRelation, RelationKind, extract_faults
from critmatrix.relations import (
    add_relation,
    build_traceability_graph,
    guard_candidates,
    impact_value,
    propagation_scope,
)

from conftest import make_random_project

SYS = "Autonomous Car Platooning"
DETECTION = f"Detection Failure.[{SYS}.FMEA_0]"
LIDAR = f"Lidar Sensor Failure.[{SYS}.FMEA_0]"
PROX_MALF = f"Proximity Sensor malfunction.[{SYS}.ETA_0]"
ISOLATED_GUARD = "SG-decrease-speed"


def brute_force_scope(edges, start):
    """Independent fixed-point expansion of one-step successors."""
    succ = {}
    for kind, source, target in edges:
        succ.setdefault(source, set()).add(target)
    reachable = set()
    frontier = {start}
    while frontier:
        step = set()
        for node in frontier:
            step |= succ.get(node, set())
        frontier = step - reachable - {start}
        reachable |= frontier
    return reachable


def test_impact_values_match_figure(platooning):
    graph = build_traceability_graph(platooning)
    assert impact_value(graph, DETECTION).value == Decimal("0.3")
    assert impact_value(graph, f"Wrong Decision.[{SYS}.FMEA_0]").value == Decimal("0.2")
    assert impact_value(graph, LIDAR).value == Decimal("0.1")


def test_impact_value_counts_only_outgoing(platooning):
    graph = build_traceability_graph(platooning)
    # Car Collision has many incoming edges but exactly one outgoing.
    assert impact_value(graph, f"Car Collision.[{SYS}.ETA_0]").value == Decimal("0.1")


def test_impact_value_unknown_fault(platooning):
    graph = build_traceability_graph(platooning)
    with pytest.raises(UnknownFault):
        impact_value(graph, "Nope.[X.FMEA_0]")


def test_supplement_edges_never_count(platooning):
    graph = build_traceability_graph(platooning)
    # Lidar receives a supplement edge; its impact value is its one
    # fault-to-fault edge, and dropping supplements changes nothing.
    stripped = build_traceability_graph(platooning)
    assert impact_value(graph, LIDAR).value == impact_value(stripped, LIDAR).value == Decimal("0.1")
    assert all(e.kind is not RelationKind.SUPPLEMENT for e in graph.edges)


def test_synthetic_impact_examples():
    # Two outgoing influence edges -> 0.2; one inheritance + two influence -> 0.3.
    project = make_random_project(random.Random(3), max_rows=4, max_edges=0)
    keys = sorted({f.key for f in extract_faults(project)})
    assert len(keys) >= 4
    a, b, c, d = keys[:4]
    for kind, source, target in [
        (RelationKind.INFLUENCE, a, b),
        (RelationKind.INFLUENCE, a, c),
        (RelationKind.INHERITANCE, d, a),
        (RelationKind.INFLUENCE, d, b),
        (RelationKind.INFLUENCE, d, c),
    ]:
        project = add_relation(project, ContentRelation(kind, source, target, note="x"))
    graph = build_traceability_graph(project)
    assert impact_value(graph, a).value == Decimal("0.2")
    assert impact_value(graph, d).value == Decimal("0.3")
    assert impact_value(graph, b).value == Decimal("0")


def test_add_relation_rejects_duplicate(platooning):
    existing = platooning.relations[0]
    with pytest.raises(DuplicateRelation):
        add_relation(platooning, existing)


def test_add_relation_rejects_self_loop(platooning):
    with pytest.raises(SelfLoop):
        add_relation(platooning, ContentRelation(RelationKind.INFLUENCE, DETECTION, DETECTION))


def test_add_relation_rejects_guard_in_fault_relation(platooning):
    with pytest.raises(KindMismatch):
        add_relation(platooning, ContentRelation(
            RelationKind.INFLUENCE, ISOLATED_GUARD, DETECTION))


def test_add_relation_rejects_fault_as_supplement_source(platooning):
    with pytest.raises(KindMismatch):
        add_relation(platooning, ContentRelation(
            RelationKind.SUPPLEMENT, DETECTION, LIDAR))


def test_add_relation_rejects_unknown_endpoint(platooning):
    with pytest.raises(EndpointNotFound):
        add_relation(platooning, ContentRelation(
            RelationKind.INFLUENCE, DETECTION, "Ghost.[X.FMEA_9]"))


def test_add_relation_returns_new_project(platooning):
    relation = ContentRelation(RelationKind.OVERLAP, LIDAR, PROX_MALF)
    bigger = add_relation(platooning, relation)
    assert len(bigger.relations) == len(platooning.relations) + 1
    assert relation in bigger.relations
    assert relation not in platooning.relations


def test_propagation_scope_empty_for_sink(platooning):
    # Build a graph where one node has no outgoing edges.
    project = make_random_project(random.Random(0), max_edges=0)
    graph = build_traceability_graph(project)
    any_key = next(iter(graph.nodes))
    assert propagation_scope(graph, any_key) == []


def test_propagation_scope_line_graph():
    project = make_random_project(random.Random(3), max_rows=4, max_edges=0)
    keys = sorted({f.key for f in extract_faults(project)})
    assert len(keys) >= 3
    a, b, c = keys[:3]
    project = add_relation(project, ContentRelation(RelationKind.INFLUENCE, a, b))
    project = add_relation(project, ContentRelation(RelationKind.INFLUENCE, b, c))
    graph = build_traceability_graph(project)
    assert propagation_scope(graph, a) == [b, c]


def test_propagation_scope_fixture_detection_failure(platooning):
    graph = build_traceability_graph(platooning)
    scope = propagation_scope(graph, DETECTION)
    edges = [(e.kind, e.source, e.target) for e in graph.edges]
    assert set(scope) == brute_force_scope(edges, DETECTION)
    assert DETECTION not in scope
    # The cycle through Car Collision <-> Mechanical Failure must terminate.
    assert f"Mechanical Failure.[{SYS}.ETA_0]" in scope


def test_propagation_scope_matches_brute_force_on_random_graphs():
    rng = random.Random(42)
    for _ in range(50):
        project = make_random_project(rng, max_rows=5, max_edges=20)
        graph = build_traceability_graph(project)
        edges = [(e.kind, e.source, e.target) for e in graph.edges]
        for key in graph.nodes:
            assert set(propagation_scope(graph, key)) == brute_force_scope(edges, key)


def test_graph_equality_is_order_independent(platooning):
    rng = random.Random(9)
    shuffled = list(platooning.relations)
    rng.shuffle(shuffled)
    reordered = platooning.__class__(
        name=platooning.name, systems=platooning.systems,
        artifacts=platooning.artifacts, relations=tuple(shuffled),
        guards=platooning.guards, preapply_fmea_guards=platooning.preapply_fmea_guards)
    g1 = build_traceability_graph(platooning)
    g2 = build_traceability_graph(reordered)
    assert g1 == g2
    for key in g1.nodes:
        assert impact_value(g1, key).value == impact_value(g2, key).value
        assert propagation_scope(g1, key) == propagation_scope(g2, key)


def test_incoming_edge_does_not_change_impact(platooning):
    graph = build_traceability_graph(platooning)
    before = impact_value(graph, PROX_MALF).value
    bigger = add_relation(platooning, ContentRelation(
        RelationKind.INFLUENCE, f"Cyber Attack.[{SYS}.FTA_0]", PROX_MALF))
    after = impact_value(build_traceability_graph(bigger), PROX_MALF).value
    assert before == after


def test_outgoing_edge_adds_exactly_a_tenth(platooning):
    graph = build_traceability_graph(platooning)
    before = impact_value(graph, PROX_MALF).value
    bigger = add_relation(platooning, ContentRelation(
        RelationKind.OVERLAP, PROX_MALF, f"Cyber Attack.[{SYS}.FTA_0]"))
    after = impact_value(build_traceability_graph(bigger), PROX_MALF).value
    assert after == before + Decimal("0.1")


def test_guard_candidates_lidar_order(platooning):
    guards = guard_candidates(platooning, LIDAR)
    assert [g.description for g in guards] == [
        "Reduce Speed and exit platooning",
        "Check for secondary sensor",
    ]


def test_guard_candidates_empty(platooning):
    guards = guard_candidates(platooning, f"Incorrection decision by Proximity sensor.[{SYS}.ETA_0]")
    assert guards == []


def test_guard_candidates_unknown_fault(platooning):
    with pytest.raises(UnknownFault):
        guard_candidates(platooning, "Ghost.[X.FMEA_9]")


def test_guard_shared_by_supplement_appears_for_both(platooning):
    # Check-for-secondary-sensor guards its own row's system effect and, via
    # the supplement edge, the identical proximity fault in the event tree.
    own = guard_candidates(platooning, LIDAR)
    borrowed = guard_candidates(platooning, PROX_MALF)
    assert any(g.id == "SG-check-secondary-sensor" for g in own)
    assert any(g.id == "SG-check-secondary-sensor" for g in borrowed)
