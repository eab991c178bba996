from __future__ import annotations

import random
from decimal import Decimal
from pathlib import Path

import pytest

from critmatrix.ids import ArtifactKind
from critmatrix.model import (
    ArtifactId,
    ContentRelation,
    ElementRef,
    FmeaRow,
    FmeaTable,
    HazardArtifact,
    Project,
    RelationKind,
    SafetyGuard,
    SystemDecl,
    extract_faults,
    load_project,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def platooning():
    return load_project(FIXTURES / "platooning.json")


@pytest.fixture(scope="session")
def platooning_whatif():
    return load_project(FIXTURES / "platooning_whatif.json")


def make_random_project(rng: random.Random, max_rows: int = 5, max_edges: int = 20,
                        max_guards_per_fault: int = 3, preapply: bool | None = None) -> Project:
    """Small synthetic project: one FMEA, random relations and guards.

    Each FMEA row contributes two faults (failure mode + system effect), so
    max_rows=5 keeps the fault count at <= 10.
    """
    system = SystemDecl(name="Sys")
    n_rows = rng.randint(1, max_rows)
    guards = []
    rows = []
    for i in range(n_rows):
        guard_id = None
        guard_prob = None
        if rng.random() < 0.6:
            guard_id = f"G{i}"
            guard_prob = Decimal(rng.randint(0, 40)) / Decimal(100)
            guards.append(SafetyGuard(
                id=guard_id, description=f"guard {i}", probability=guard_prob,
                origin=ElementRef(ArtifactId(ArtifactKind.FMEA, 0), f"rows[{i}]")))
        rows.append(FmeaRow(
            item=f"item {i}",
            failure_mode=f"FM{i}",
            causal_factors="cause",
            immediate_effect="effect",
            system_effect=f"SE{i}",
            probability_of_occurrence=Decimal(rng.randint(0, 100)) / Decimal(100),
            safety_guard=guard_id,
            probability_of_safety_guard=guard_prob,
        ))
    artifact = HazardArtifact(id=ArtifactId(ArtifactKind.FMEA, 0), system="Sys",
                              body=FmeaTable(rows=tuple(rows)))
    project = Project(name="random", systems=(system,), artifacts=(artifact,),
                      guards=tuple(guards),
                      preapply_fmea_guards=rng.random() < 0.5 if preapply is None else preapply)

    fault_keys = [record.key for record in extract_faults(project)]
    relations = []
    seen = set()
    kinds = [RelationKind.INFLUENCE, RelationKind.INHERITANCE, RelationKind.OVERLAP]
    for _ in range(rng.randint(0, max_edges)):
        source, target = rng.choice(fault_keys), rng.choice(fault_keys)
        kind = rng.choice(kinds)
        if source == target or (kind, source, target) in seen:
            continue
        seen.add((kind, source, target))
        relations.append(ContentRelation(kind=kind, source=source, target=target))

    # Supplement edges give faults extra guard candidates (up to the cap).
    for guard in guards:
        for _ in range(rng.randint(0, max_guards_per_fault - 1)):
            target = rng.choice(fault_keys)
            triple = (RelationKind.SUPPLEMENT, guard.id, target)
            if triple in seen:
                continue
            seen.add(triple)
            relations.append(ContentRelation(kind=RelationKind.SUPPLEMENT,
                                             source=guard.id, target=target))

    return Project(name=project.name, systems=project.systems,
                   artifacts=project.artifacts, relations=tuple(relations),
                   guards=project.guards,
                   preapply_fmea_guards=project.preapply_fmea_guards)
