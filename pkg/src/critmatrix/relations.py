"""Fault traceability graph and impact values.

The graph's nodes are the project's extracted faults; its directed edges are
the fault-to-fault content relations (influence, inheritance, overlap).
Supplement relations carry guard applicability only and never enter the
graph: they neither add impact nor extend propagation.

A fault's impact value is 0.1 per outgoing edge, the number of other faults
it can activate.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .decimals import TENTH
from .errors import (
    DuplicateRelation,
    EndpointNotFound,
    KindMismatch,
    SelfLoop,
    UnknownFault,
)
from .model import (
    FAULT_RELATION_KINDS,
    ContentRelation,
    FaultRecord,
    Project,
    RelationKind,
    SafetyGuard,
    extract_faults,
)


@dataclass(frozen=True)
class FaultTraceabilityGraph:
    nodes: dict[str, FaultRecord]
    edges: tuple[ContentRelation, ...]

    def __eq__(self, other) -> bool:
        # Permutations of the same edge set are the same graph.
        if not isinstance(other, FaultTraceabilityGraph):
            return NotImplemented
        return (set(self.nodes) == set(other.nodes)
                and set(e.triple() for e in self.edges) == set(e.triple() for e in other.edges))

    def outgoing(self, fault_key: str) -> list[ContentRelation]:
        return [e for e in self.edges if e.source == fault_key]


@dataclass(frozen=True)
class ImpactValue:
    value: Decimal
    contributing_edges: tuple[ContentRelation, ...]


def build_traceability_graph(project: Project, faults: list[FaultRecord] | None = None,
                             ) -> FaultTraceabilityGraph:
    """Assemble the graph from a validated project's fault-to-fault relations."""
    if faults is None:
        faults = extract_faults(project)
    nodes = {record.key: record for record in faults}
    edges = tuple(r for r in project.relations if r.kind in FAULT_RELATION_KINDS)
    return FaultTraceabilityGraph(nodes=nodes, edges=edges)


def add_relation(project: Project, relation: ContentRelation) -> Project:
    """Return a new project with the relation added.

    Raises SelfLoop, DuplicateRelation, KindMismatch (supplement with a
    non-guard source, or a fault-kind relation touching a guard id), or
    EndpointNotFound.
    """
    if relation.source == relation.target:
        raise SelfLoop(f"{relation.source} -> itself")
    for existing in project.relations:
        if existing.triple() == relation.triple():
            raise DuplicateRelation(
                f"{relation.kind.value}: {relation.source} -> {relation.target}")

    guard_ids = {g.id for g in project.guards}
    fault_keys = {record.key for record in extract_faults(project)}

    if relation.kind is RelationKind.SUPPLEMENT:
        if relation.source not in guard_ids:
            raise KindMismatch(f"supplement source {relation.source!r} is not a guard")
        if relation.target in guard_ids:
            raise KindMismatch(f"supplement target {relation.target!r} is a guard")
        if relation.target not in fault_keys:
            raise EndpointNotFound(relation.target)
    else:
        for endpoint in (relation.source, relation.target):
            if endpoint in guard_ids:
                raise KindMismatch(
                    f"{relation.kind.value} endpoint {endpoint!r} is a guard")
            if endpoint not in fault_keys:
                raise EndpointNotFound(endpoint)

    return project.with_relation(relation)


def impact_value(graph: FaultTraceabilityGraph, fault_key: str) -> ImpactValue:
    """0.1 per outgoing fault-to-fault edge; supplement edges never count."""
    if fault_key not in graph.nodes:
        raise UnknownFault(fault_key)
    contributing = tuple(graph.outgoing(fault_key))
    return ImpactValue(value=TENTH * len(contributing), contributing_edges=contributing)


def propagation_scope(graph: FaultTraceabilityGraph, fault_key: str) -> list[str]:
    """All faults reachable from the given one, breadth-first, excluding it.

    Terminates under cycles; successors are visited in qualified-id order so
    the result does not depend on relation declaration order.
    """
    if fault_key not in graph.nodes:
        raise UnknownFault(fault_key)
    successors: dict[str, set[str]] = {}
    for edge in graph.edges:
        successors.setdefault(edge.source, set()).add(edge.target)

    visited: set[str] = {fault_key}
    order: list[str] = []
    frontier = [fault_key]
    while frontier:
        next_frontier: list[str] = []
        for node in frontier:
            for succ in sorted(successors.get(node, ()),
                               key=lambda k: graph.nodes[k].qualified_id.sort_key()):
                if succ not in visited:
                    visited.add(succ)
                    order.append(succ)
                    next_frontier.append(succ)
        frontier = next_frontier
    return order


def guard_candidates(project: Project, fault_key: str,
                     faults: list[FaultRecord] | None = None) -> list[SafetyGuard]:
    """Guards that may be applied to a fault.

    Candidates are the guard attached to the fault's own FMEA row (the
    system-effect column is what an FMEA guard mitigates) plus any guard
    connected by a supplement relation. Deduplicated; ordered by guard
    declaration order.
    """
    if faults is None:
        faults = extract_faults(project)
    by_key = {record.key: record for record in faults}
    record = by_key.get(fault_key)
    if record is None:
        raise UnknownFault(fault_key)

    candidate_ids: set[str] = set()
    if record.source.element.endswith(".system_effect"):
        row_index = int(record.source.element.split("[")[1].split("]")[0])
        for artifact in project.artifacts:
            if artifact.id == record.source.artifact:
                row = artifact.body.rows[row_index]
                if row.safety_guard is not None:
                    candidate_ids.add(row.safety_guard)
    for relation in project.relations:
        if relation.kind is RelationKind.SUPPLEMENT and relation.target == fault_key:
            candidate_ids.add(relation.source)

    return [g for g in project.guards if g.id in candidate_ids]
