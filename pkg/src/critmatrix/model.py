"""Composite hazard-analysis project model.

A project bundles the hazard-analysis artifacts of one or more collaborating
systems: fault trees (FTA), failure mode and effect tables (FMEA), and event
trees (ETA), together with the typed content relations that link their
elements and the safety guards declared for them.

Everything is an immutable value after loading. The project file is a single
JSON document; probabilities are carried as decimal literal *strings* so that
exactness survives the wire (see `decimals`).

Fault extraction walks the artifacts and yields one `FaultRecord` per
fault-bearing element:

* FTA: every event that states a probability (gated events may omit it,
  in which case they are structural only),
* FMEA: each row's failure mode and system effect,
* ETA: each barrier's failure-branch event and each hazardous outcome.

Duplicate fault names inside one artifact get "#2", "#3", ... suffixes in
extraction order; the result is sorted by qualified id.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

from .decimals import ONE, ZERO, dec, fmt
from .errors import MissingProbability, ParseError, ValidationError
from .ids import ArtifactKind, QualifiedFaultId, format_qualified_id

ETA_TOLERANCE = Decimal("1e-9")


class Gate(enum.Enum):
    AND = "AND"
    OR = "OR"


class OutcomeKind(enum.Enum):
    SAFE = "safe"
    HAZARDOUS = "hazardous"


class Branch(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class RelationKind(enum.Enum):
    INFLUENCE = "influence"
    INHERITANCE = "inheritance"
    OVERLAP = "overlap"
    SUPPLEMENT = "supplement"


FAULT_RELATION_KINDS = frozenset(
    {RelationKind.INFLUENCE, RelationKind.INHERITANCE, RelationKind.OVERLAP}
)


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: where it is and what is wrong."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class ArtifactId:
    kind: ArtifactKind
    index: int

    def __str__(self) -> str:
        return f"{self.kind.value}_{self.index}"


@dataclass(frozen=True)
class ElementRef:
    """Reference to one element inside an artifact (row, event, branch...)."""

    artifact: ArtifactId
    element: str

    def __str__(self) -> str:
        return f"{self.artifact}/{self.element}"


@dataclass(frozen=True)
class SystemDecl:
    name: str
    description: str = ""


@dataclass(frozen=True)
class FtaEvent:
    name: str
    level: int
    probability: Decimal | None = None
    gate: Gate | None = None
    children: tuple[FtaEvent, ...] = ()


@dataclass(frozen=True)
class FtaTree:
    # Normally exactly one top event; kept as a tuple so that the
    # "exactly one top event" invariant is checkable, not assumed.
    top_events: tuple[FtaEvent, ...]

    @property
    def top_event(self) -> FtaEvent:
        return self.top_events[0]


@dataclass(frozen=True)
class FmeaRow:
    item: str
    failure_mode: str
    causal_factors: str
    immediate_effect: str
    system_effect: str
    probability_of_occurrence: Decimal
    safety_guard: str | None = None
    probability_of_safety_guard: Decimal | None = None


@dataclass(frozen=True)
class FmeaTable:
    rows: tuple[FmeaRow, ...]


@dataclass(frozen=True)
class EtaBarrier:
    name: str
    failure_event: str
    success_probability: Decimal
    failure_probability: Decimal


@dataclass(frozen=True)
class EtaOutcome:
    name: str
    kind: OutcomeKind
    # Path through the tree: (barrier index, branch taken), indices
    # strictly increasing. Barriers not on the path did not apply.
    path: tuple[tuple[int, Branch], ...]
    probability: Decimal


@dataclass(frozen=True)
class EtaTree:
    initiating_name: str
    initiating_probability: Decimal
    barriers: tuple[EtaBarrier, ...]
    outcomes: tuple[EtaOutcome, ...]


Body = FtaTree | FmeaTable | EtaTree

_BODY_KIND = {FtaTree: ArtifactKind.FTA, FmeaTable: ArtifactKind.FMEA, EtaTree: ArtifactKind.ETA}


@dataclass(frozen=True)
class HazardArtifact:
    id: ArtifactId
    system: str
    body: Body


@dataclass(frozen=True)
class SafetyGuard:
    id: str
    description: str
    probability: Decimal
    origin: ElementRef


@dataclass(frozen=True)
class ContentRelation:
    """Typed edge between artifact elements.

    Endpoints are qualified fault ids; a supplement relation instead has a
    guard id as its source ("this guard also applies to that fault").
    """

    kind: RelationKind
    source: str
    target: str
    note: str | None = None

    def triple(self) -> tuple[RelationKind, str, str]:
        return (self.kind, self.source, self.target)


@dataclass(frozen=True)
class FaultRecord:
    qualified_id: QualifiedFaultId
    display_name: str
    source: ElementRef
    probability: Decimal

    @property
    def key(self) -> str:
        return format_qualified_id(self.qualified_id)


@dataclass(frozen=True)
class Project:
    name: str
    systems: tuple[SystemDecl, ...] = ()
    artifacts: tuple[HazardArtifact, ...] = ()
    relations: tuple[ContentRelation, ...] = ()
    guards: tuple[SafetyGuard, ...] = ()
    # When true, guards declared in FMEA guard columns are applied in the
    # initial matrix to every fault they are a candidate for.
    preapply_fmea_guards: bool = False
    # Accepted what-if assignments, persisted by "project save".
    assignments: tuple[tuple[str, str], ...] = ()

    def guard_by_id(self, guard_id: str) -> SafetyGuard | None:
        for g in self.guards:
            if g.id == guard_id:
                return g
        return None

    def with_relation(self, relation: ContentRelation) -> Project:
        return replace(self, relations=self.relations + (relation,))


# ---------------------------------------------------------------------------
# JSON parsing
# ---------------------------------------------------------------------------


def _require(obj: dict, key: str, locus: str):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", locus)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", locus)
    return obj[key]


def _text(obj: dict, key: str, locus: str) -> str:
    value = _require(obj, key, locus)
    if not isinstance(value, str):
        raise ParseError(f"field {key!r} must be a string", locus)
    return value


def _probability(obj: dict, key: str, locus: str) -> Decimal:
    return dec(_require(obj, key, locus), f"{locus}.{key}")


def _parse_artifact_id(text: str, locus: str) -> ArtifactId:
    kind_text, _, index_text = text.partition("_")
    try:
        kind = ArtifactKind(kind_text)
        index = int(index_text)
    except ValueError:
        raise ParseError(f"bad artifact id {text!r}", locus) from None
    if index < 0 or (index_text != "0" and index_text.lstrip("0") != index_text):
        raise ParseError(f"bad artifact index in {text!r}", locus)
    return ArtifactId(kind, index)


def _parse_fta_event(obj: dict, level: int, locus: str) -> FtaEvent:
    name = _text(obj, "name", locus)
    probability = None
    if obj.get("probability") is not None:
        probability = dec(obj["probability"], f"{locus}.probability")
    gate = None
    children: tuple[FtaEvent, ...] = ()
    if "children" in obj and obj["children"]:
        gate_text = _text(obj, "gate", locus)
        try:
            gate = Gate(gate_text)
        except ValueError:
            raise ParseError(f"unknown gate {gate_text!r}", locus) from None
        children = tuple(
            _parse_fta_event(child, level + 1, f"{locus}.children[{i}]")
            for i, child in enumerate(obj["children"])
        )
    declared_level = obj.get("level", level)
    if not isinstance(declared_level, int):
        raise ParseError("field 'level' must be an integer", locus)
    return FtaEvent(name=name, level=declared_level, probability=probability,
                    gate=gate, children=children)


def _parse_fta(body: dict, locus: str) -> FtaTree:
    top = _require(body, "top_event", locus)
    tops = top if isinstance(top, list) else [top]
    events = tuple(
        _parse_fta_event(t, 0, f"{locus}.top_event[{i}]") for i, t in enumerate(tops)
    )
    return FtaTree(top_events=events)


def _parse_fmea(body: dict, locus: str) -> FmeaTable:
    rows = []
    for i, row in enumerate(_require(body, "rows", locus)):
        row_locus = f"{locus}.rows[{i}]"
        guard = row.get("safety_guard")
        guard_prob = None
        if row.get("probability_of_safety_guard") is not None:
            guard_prob = dec(row["probability_of_safety_guard"],
                             f"{row_locus}.probability_of_safety_guard")
        rows.append(FmeaRow(
            item=_text(row, "item", row_locus),
            failure_mode=_text(row, "failure_mode", row_locus),
            causal_factors=_text(row, "causal_factors", row_locus),
            immediate_effect=_text(row, "immediate_effect", row_locus),
            system_effect=_text(row, "system_effect", row_locus),
            probability_of_occurrence=_probability(row, "probability_of_occurrence", row_locus),
            safety_guard=guard,
            probability_of_safety_guard=guard_prob,
        ))
    return FmeaTable(rows=tuple(rows))


def _parse_eta(body: dict, locus: str) -> EtaTree:
    initiating = _require(body, "initiating_event", locus)
    barriers = []
    for i, barrier in enumerate(_require(body, "barriers", locus)):
        barrier_locus = f"{locus}.barriers[{i}]"
        barriers.append(EtaBarrier(
            name=_text(barrier, "name", barrier_locus),
            failure_event=_text(barrier, "failure_event", barrier_locus),
            success_probability=_probability(barrier, "success_probability", barrier_locus),
            failure_probability=_probability(barrier, "failure_probability", barrier_locus),
        ))
    outcomes = []
    for i, outcome in enumerate(_require(body, "outcomes", locus)):
        outcome_locus = f"{locus}.outcomes[{i}]"
        kind_text = _text(outcome, "kind", outcome_locus)
        try:
            kind = OutcomeKind(kind_text)
        except ValueError:
            raise ParseError(f"unknown outcome kind {kind_text!r}", outcome_locus) from None
        path = []
        for j, step in enumerate(_require(outcome, "path", outcome_locus)):
            step_locus = f"{outcome_locus}.path[{j}]"
            if not (isinstance(step, list) and len(step) == 2 and isinstance(step[0], int)):
                raise ParseError("path step must be [barrier_index, branch]", step_locus)
            try:
                branch = Branch(step[1])
            except ValueError:
                raise ParseError(f"unknown branch {step[1]!r}", step_locus) from None
            path.append((step[0], branch))
        outcomes.append(EtaOutcome(
            name=_text(outcome, "name", outcome_locus),
            kind=kind,
            path=tuple(path),
            probability=_probability(outcome, "probability", outcome_locus),
        ))
    return EtaTree(
        initiating_name=_text(initiating, "name", f"{locus}.initiating_event"),
        initiating_probability=_probability(initiating, "probability", f"{locus}.initiating_event"),
        barriers=tuple(barriers),
        outcomes=tuple(outcomes),
    )


_BODY_PARSERS = {"fta": _parse_fta, "fmea": _parse_fmea, "eta": _parse_eta}


def parse_project(data: dict) -> Project:
    """Build a Project from decoded JSON; structural problems -> ParseError."""
    if not isinstance(data, dict):
        raise ParseError("project file must contain a JSON object", "$")
    name = _text(data, "name", "$")

    systems = tuple(
        SystemDecl(name=_text(s, "name", f"$.systems[{i}]"),
                   description=s.get("description", ""))
        for i, s in enumerate(data.get("systems", []))
    )

    artifacts = []
    for i, a in enumerate(data.get("artifacts", [])):
        locus = f"$.artifacts[{i}]"
        art_id = _parse_artifact_id(_text(a, "id", locus), locus)
        body_obj = _require(a, "body", locus)
        kind_text = _text(body_obj, "kind", f"{locus}.body")
        parser = _BODY_PARSERS.get(kind_text)
        if parser is None:
            raise ParseError(f"unknown artifact kind {kind_text!r}", f"{locus}.body")
        body = parser(body_obj, f"{locus}.body")
        artifacts.append(HazardArtifact(id=art_id, system=_text(a, "system", locus), body=body))

    relations = []
    for i, r in enumerate(data.get("relations", [])):
        locus = f"$.relations[{i}]"
        kind_text = _text(r, "kind", locus)
        try:
            kind = RelationKind(kind_text)
        except ValueError:
            raise ParseError(f"unknown relation kind {kind_text!r}", locus) from None
        relations.append(ContentRelation(
            kind=kind,
            source=_text(r, "source", locus),
            target=_text(r, "target", locus),
            note=r.get("note"),
        ))

    guards = []
    for i, g in enumerate(data.get("guards", [])):
        locus = f"$.guards[{i}]"
        origin = _require(g, "origin", locus)
        guards.append(SafetyGuard(
            id=_text(g, "id", locus),
            description=_text(g, "description", locus),
            probability=_probability(g, "probability", locus),
            origin=ElementRef(
                artifact=_parse_artifact_id(_text(origin, "artifact", f"{locus}.origin"),
                                            f"{locus}.origin"),
                element=_text(origin, "element", f"{locus}.origin"),
            ),
        ))

    assignments = []
    for i, a in enumerate(data.get("assignments", [])):
        locus = f"$.assignments[{i}]"
        assignments.append((_text(a, "fault", locus), _text(a, "guard", locus)))

    preapply = data.get("preapply_fmea_guards", False)
    if not isinstance(preapply, bool):
        raise ParseError("field 'preapply_fmea_guards' must be a boolean", "$")

    return Project(
        name=name,
        systems=systems,
        artifacts=tuple(artifacts),
        relations=tuple(relations),
        guards=tuple(guards),
        preapply_fmea_guards=preapply,
        assignments=tuple(assignments),
    )


def load_project(path: str | Path) -> Project:
    """Load, parse, and validate a project file.

    Raises ParseError for malformed files (with a locus) and
    ValidationError listing *every* invariant violation found.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    project = parse_project(data)
    diagnostics = validate_project(project)
    if diagnostics:
        raise ValidationError(diagnostics)
    return project


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _in_unit(value: Decimal) -> bool:
    return ZERO <= value <= ONE


def _validate_fta_event(event: FtaEvent, depth: int, path: str, out: list[Diagnostic]) -> None:
    if event.probability is not None and not _in_unit(event.probability):
        out.append(Diagnostic(path, f"probability {fmt(event.probability)} outside [0,1]"))
    if event.level != depth:
        out.append(Diagnostic(path, f"level {event.level} does not match depth {depth}"))
    if event.children and event.gate is None:
        out.append(Diagnostic(path, "gated event without a gate"))
    for i, child in enumerate(event.children):
        _validate_fta_event(child, depth + 1, f"{path}.children[{i}]", out)


def validate_artifact(artifact: HazardArtifact) -> list[Diagnostic]:
    """Check all type invariants of one artifact; empty list means valid."""
    out: list[Diagnostic] = []
    path = str(artifact.id)
    body = artifact.body

    expected = _BODY_KIND[type(body)]
    if expected is not artifact.id.kind:
        out.append(Diagnostic(path, f"body kind {expected.value} does not match id"))

    if isinstance(body, FtaTree):
        if len(body.top_events) != 1:
            out.append(Diagnostic(path, f"exactly one top event required, found {len(body.top_events)}"))
        for i, top in enumerate(body.top_events):
            _validate_fta_event(top, 0, f"{path}.top_event[{i}]", out)

    elif isinstance(body, FmeaTable):
        for i, row in enumerate(body.rows):
            row_path = f"{path}.rows[{i}]"
            if not _in_unit(row.probability_of_occurrence):
                out.append(Diagnostic(f"{row_path}.probability_of_occurrence",
                                      f"probability {fmt(row.probability_of_occurrence)} outside [0,1]"))
            if (row.safety_guard is None) != (row.probability_of_safety_guard is None):
                out.append(Diagnostic(row_path,
                                      "probability_of_safety_guard present iff safety_guard is"))
            if row.probability_of_safety_guard is not None and not _in_unit(row.probability_of_safety_guard):
                out.append(Diagnostic(f"{row_path}.probability_of_safety_guard",
                                      f"probability {fmt(row.probability_of_safety_guard)} outside [0,1]"))

    elif isinstance(body, EtaTree):
        if not _in_unit(body.initiating_probability):
            out.append(Diagnostic(f"{path}.initiating_event",
                                  f"probability {fmt(body.initiating_probability)} outside [0,1]"))
        for i, barrier in enumerate(body.barriers):
            barrier_path = f"{path}.barriers[{i}]"
            for label, p in (("success", barrier.success_probability),
                             ("failure", barrier.failure_probability)):
                if not _in_unit(p):
                    out.append(Diagnostic(barrier_path, f"{label} probability {fmt(p)} outside [0,1]"))
            total = barrier.success_probability + barrier.failure_probability
            if abs(total - ONE) > ETA_TOLERANCE:
                out.append(Diagnostic(barrier_path,
                                      f"branch probabilities sum to {fmt(total)}, not 1"))
        for i, outcome in enumerate(body.outcomes):
            outcome_path = f"{path}.outcomes[{i}]"
            if not _in_unit(outcome.probability):
                out.append(Diagnostic(outcome_path,
                                      f"probability {fmt(outcome.probability)} outside [0,1]"))
            previous = -1
            product = body.initiating_probability
            broken = False
            for barrier_index, branch in outcome.path:
                if barrier_index <= previous or barrier_index >= len(body.barriers):
                    out.append(Diagnostic(outcome_path, f"bad path barrier index {barrier_index}"))
                    broken = True
                    break
                previous = barrier_index
                barrier = body.barriers[barrier_index]
                product *= (barrier.success_probability if branch is Branch.SUCCESS
                            else barrier.failure_probability)
            if not broken and abs(outcome.probability - product) > ETA_TOLERANCE:
                out.append(Diagnostic(outcome_path,
                                      f"stated probability {fmt(outcome.probability)} differs from "
                                      f"path product {fmt(product)}"))

    return out


def validate_project(project: Project) -> list[Diagnostic]:
    """Project-level invariants plus every artifact's own diagnostics."""
    out: list[Diagnostic] = []

    seen_systems: set[str] = set()
    for system in project.systems:
        if system.name in seen_systems:
            out.append(Diagnostic("$.systems", f"duplicate system name {system.name!r}"))
        seen_systems.add(system.name)

    seen_artifacts: set[str] = set()
    for artifact in project.artifacts:
        key = str(artifact.id)
        if key in seen_artifacts:
            out.append(Diagnostic("$.artifacts", f"duplicate artifact id {key}"))
        seen_artifacts.add(key)
        if artifact.system not in seen_systems:
            out.append(Diagnostic(key, f"unknown system {artifact.system!r}"))
        out.extend(validate_artifact(artifact))

    seen_guards: set[str] = set()
    for guard in project.guards:
        if guard.id in seen_guards:
            out.append(Diagnostic("$.guards", f"duplicate guard id {guard.id!r}"))
        seen_guards.add(guard.id)
        if not _in_unit(guard.probability):
            out.append(Diagnostic(f"$.guards[{guard.id}]",
                                  f"probability {fmt(guard.probability)} outside [0,1]"))
        if str(guard.origin.artifact) not in seen_artifacts:
            out.append(Diagnostic(f"$.guards[{guard.id}]",
                                  f"origin artifact {guard.origin.artifact} does not exist"))

    for artifact in project.artifacts:
        if not isinstance(artifact.body, FmeaTable):
            continue
        for i, row in enumerate(artifact.body.rows):
            if row.safety_guard is None:
                continue
            row_path = f"{artifact.id}.rows[{i}]"
            guard = project.guard_by_id(row.safety_guard)
            if guard is None:
                out.append(Diagnostic(row_path, f"unknown guard {row.safety_guard!r}"))
            elif (row.probability_of_safety_guard is not None
                  and guard.probability != row.probability_of_safety_guard):
                out.append(Diagnostic(row_path,
                                      f"guard probability {fmt(row.probability_of_safety_guard)} "
                                      f"disagrees with declared {fmt(guard.probability)}"))

    # Relation endpoints must resolve; fault extraction may be impossible on
    # a broken project, in which case endpoint checks are skipped (the
    # underlying diagnostics are already in `out`).
    try:
        fault_keys = {record.key for record in extract_faults(project, validate=False)}
    except MissingProbability:
        fault_keys = None
    if fault_keys is not None:
        seen_triples: set[tuple] = set()
        for i, relation in enumerate(project.relations):
            locus = f"$.relations[{i}]"
            if relation.source == relation.target:
                out.append(Diagnostic(locus, "self-loop"))
            if relation.triple() in seen_triples:
                out.append(Diagnostic(locus, "duplicate relation"))
            seen_triples.add(relation.triple())
            if relation.kind is RelationKind.SUPPLEMENT:
                if relation.source not in seen_guards:
                    out.append(Diagnostic(locus, f"supplement source {relation.source!r} is not a guard"))
                if relation.target not in fault_keys:
                    out.append(Diagnostic(locus, f"unknown fault {relation.target!r}"))
            else:
                for endpoint in (relation.source, relation.target):
                    if endpoint in seen_guards:
                        out.append(Diagnostic(locus, f"{relation.kind.value} endpoint {endpoint!r} is a guard"))
                    elif endpoint not in fault_keys:
                        out.append(Diagnostic(locus, f"unknown fault {endpoint!r}"))

        assigned: set[tuple[str, str]] = set()
        for i, (fault_key, guard_id) in enumerate(project.assignments):
            locus = f"$.assignments[{i}]"
            if fault_key not in fault_keys:
                out.append(Diagnostic(locus, f"unknown fault {fault_key!r}"))
            if guard_id not in seen_guards:
                out.append(Diagnostic(locus, f"unknown guard {guard_id!r}"))
            if (fault_key, guard_id) in assigned:
                out.append(Diagnostic(locus, "duplicate assignment"))
            assigned.add((fault_key, guard_id))

    return out


# ---------------------------------------------------------------------------
# Fault extraction
# ---------------------------------------------------------------------------


def _walk_fta(event: FtaEvent, path: str):
    yield event, path
    for i, child in enumerate(event.children):
        yield from _walk_fta(child, f"{path}.children[{i}]")


def _artifact_faults(artifact: HazardArtifact):
    """Yield (name, probability, element locus) in extraction order."""
    body = artifact.body
    if isinstance(body, FtaTree):
        for i, top in enumerate(body.top_events):
            for event, path in _walk_fta(top, f"top_event[{i}]"):
                if event.probability is None:
                    if not event.children:
                        raise MissingProbability(
                            f"{artifact.id}/{path}: basic event {event.name!r} has no probability")
                    continue  # structural event, not a ranked fault
                yield event.name, event.probability, path
    elif isinstance(body, FmeaTable):
        for i, row in enumerate(body.rows):
            yield row.failure_mode, row.probability_of_occurrence, f"rows[{i}].failure_mode"
            yield row.system_effect, row.probability_of_occurrence, f"rows[{i}].system_effect"
    elif isinstance(body, EtaTree):
        for i, barrier in enumerate(body.barriers):
            yield barrier.failure_event, barrier.failure_probability, f"barriers[{i}].failure"
        for i, outcome in enumerate(body.outcomes):
            if outcome.kind is OutcomeKind.HAZARDOUS:
                yield outcome.name, outcome.probability, f"outcomes[{i}]"


def extract_faults(project: Project, validate: bool = True) -> list[FaultRecord]:
    """Extract the qualified fault set, sorted by qualified id."""
    if validate:
        diagnostics = validate_project(project)
        if diagnostics:
            raise ValidationError(diagnostics)

    records: list[FaultRecord] = []
    for artifact in project.artifacts:
        counts: dict[str, int] = {}
        for name, probability, locus in _artifact_faults(artifact):
            counts[name] = counts.get(name, 0) + 1
            disambiguator = counts[name] if counts[name] > 1 else None
            records.append(FaultRecord(
                qualified_id=QualifiedFaultId(
                    fault_name=name,
                    system_name=artifact.system,
                    artifact_kind=artifact.id.kind,
                    artifact_index=artifact.id.index,
                    disambiguator=disambiguator,
                ),
                display_name=name,
                source=ElementRef(artifact=artifact.id, element=locus),
                probability=probability,
            ))
    records.sort(key=lambda r: r.qualified_id.sort_key())
    return records


# ---------------------------------------------------------------------------
# Serialization back to JSON
# ---------------------------------------------------------------------------


def _fta_event_json(event: FtaEvent) -> dict:
    out: dict = {"name": event.name, "level": event.level}
    if event.probability is not None:
        out["probability"] = fmt(event.probability)
    if event.children:
        out["gate"] = event.gate.value
        out["children"] = [_fta_event_json(c) for c in event.children]
    return out


def _body_json(body: Body) -> dict:
    if isinstance(body, FtaTree):
        tops = [_fta_event_json(t) for t in body.top_events]
        return {"kind": "fta", "top_event": tops[0] if len(tops) == 1 else tops}
    if isinstance(body, FmeaTable):
        rows = []
        for row in body.rows:
            item: dict = {
                "item": row.item,
                "failure_mode": row.failure_mode,
                "causal_factors": row.causal_factors,
                "immediate_effect": row.immediate_effect,
                "system_effect": row.system_effect,
                "probability_of_occurrence": fmt(row.probability_of_occurrence),
            }
            if row.safety_guard is not None:
                item["safety_guard"] = row.safety_guard
                item["probability_of_safety_guard"] = fmt(row.probability_of_safety_guard)
            rows.append(item)
        return {"kind": "fmea", "rows": rows}
    return {
        "kind": "eta",
        "initiating_event": {"name": body.initiating_name,
                             "probability": fmt(body.initiating_probability)},
        "barriers": [
            {"name": b.name, "failure_event": b.failure_event,
             "success_probability": fmt(b.success_probability),
             "failure_probability": fmt(b.failure_probability)}
            for b in body.barriers
        ],
        "outcomes": [
            {"name": o.name, "kind": o.kind.value,
             "path": [[i, branch.value] for i, branch in o.path],
             "probability": fmt(o.probability)}
            for o in body.outcomes
        ],
    }


def project_to_json(project: Project) -> dict:
    data: dict = {
        "name": project.name,
        "systems": [
            {"name": s.name, **({"description": s.description} if s.description else {})}
            for s in project.systems
        ],
        "artifacts": [
            {"id": str(a.id), "system": a.system, "body": _body_json(a.body)}
            for a in project.artifacts
        ],
        "relations": [
            {"kind": r.kind.value, "source": r.source, "target": r.target,
             **({"note": r.note} if r.note else {})}
            for r in project.relations
        ],
        "guards": [
            {"id": g.id, "description": g.description, "probability": fmt(g.probability),
             "origin": {"artifact": str(g.origin.artifact), "element": g.origin.element}}
            for g in project.guards
        ],
    }
    if project.preapply_fmea_guards:
        data["preapply_fmea_guards"] = True
    if project.assignments:
        data["assignments"] = [{"fault": f, "guard": g} for f, g in project.assignments]
    return data


def save_project(project: Project, path: str | Path) -> None:
    Path(path).write_text(json.dumps(project_to_json(project), indent=2) + "\n",
                          encoding="utf-8")
