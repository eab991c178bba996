"""Fault Criticality Matrix: build, rank, and iterate guard assignments.

Each row scores one extracted fault:

    criticality_before = probability + impact_value
    criticality_after  = criticality_before - sum(applied guard probabilities)

A zero or negative criticality means the fault no longer affects the system.
Ranking buckets criticality into seven bands whose boundaries are
upper-inclusive; values above the top band clamp to Catastrophic. All
arithmetic is exact decimal, so e.g. 0.02 + 0.3 - 0.32 ranks No Effect
rather than leaving a float residue in the Negligible band.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import re
from dataclasses import dataclass, replace
from decimal import Decimal

from .decimals import ONE, TENTH, ZERO, fmt
from .errors import (
    DomainError,
    EmptyHistory,
    GuardAlreadyApplied,
    GuardNotApplicable,
    GuardNotApplied,
    UnknownFault,
)
from .ids import QualifiedFaultId
from .model import FaultRecord, Project, extract_faults
from .relations import (
    FaultTraceabilityGraph,
    build_traceability_graph,
    guard_candidates,
    impact_value,
)


class RankBand(enum.IntEnum):
    """Criticality bands, totally ordered from harmless to catastrophic."""

    NO_EFFECT = 0
    NEGLIGIBLE = 1
    LOW = 2
    MEDIUM = 3
    HIGH = 4
    VERY_HIGH = 5
    CATASTROPHIC = 6

    @property
    def display(self) -> str:
        return _RANK_DISPLAY[self]


_RANK_DISPLAY = {
    RankBand.NO_EFFECT: "No Effect",
    RankBand.NEGLIGIBLE: "Negligible",
    RankBand.LOW: "Low",
    RankBand.MEDIUM: "Medium",
    RankBand.HIGH: "High",
    RankBand.VERY_HIGH: "Very High",
    RankBand.CATASTROPHIC: "Catastrophic",
}

# Upper-inclusive band boundaries: rank(b) is the band ending at b.
_BANDS: tuple[tuple[Decimal, RankBand], ...] = (
    (ZERO, RankBand.NO_EFFECT),
    (Decimal("0.005"), RankBand.NEGLIGIBLE),
    (Decimal("0.01"), RankBand.LOW),
    (Decimal("0.15"), RankBand.MEDIUM),
    (Decimal("0.4"), RankBand.HIGH),
    (Decimal("0.6"), RankBand.VERY_HIGH),
)


def rank(criticality: Decimal) -> RankBand:
    """Total over all decimals; everything above 0.6 is Catastrophic."""
    for bound, band in _BANDS:
        if criticality <= bound:
            return band
    return RankBand.CATASTROPHIC


def criticality_before(probability: Decimal, iv: Decimal) -> Decimal:
    """Criticality without safety guards: probability plus impact value."""
    if not ZERO <= probability <= ONE:
        raise DomainError(f"probability {fmt(probability)} outside [0,1]")
    if iv < ZERO or iv % TENTH != 0:
        raise DomainError(f"impact value {fmt(iv)} is not a multiple of 0.1 >= 0")
    return probability + iv


def fault_criticality(probability: Decimal, iv: Decimal,
                      guard_probs: list[Decimal] | tuple[Decimal, ...]) -> Decimal:
    """Criticality after guards; may be negative (fault fully mitigated)."""
    base = criticality_before(probability, iv)
    for p in guard_probs:
        if not ZERO <= p <= ONE:
            raise DomainError(f"guard probability {fmt(p)} outside [0,1]")
    return base - sum(guard_probs, ZERO)


@dataclass(frozen=True)
class FcmRow:
    fault: QualifiedFaultId
    probability: Decimal
    impact_value: Decimal
    criticality_before: Decimal
    rank_before: RankBand
    guards: tuple[tuple[str, Decimal], ...]  # (guard id, probability)
    criticality_after: Decimal
    rank_after: RankBand

    @property
    def key(self) -> str:
        return str(self.fault)


@dataclass(frozen=True)
class Fcm:
    rows: tuple[FcmRow, ...]
    project_name: str
    revision: int
    # Guard candidacy and display metadata, fixed at build time.
    candidates: dict[str, tuple[str, ...]]
    guard_catalog: dict[str, tuple[str, Decimal]]  # id -> (description, probability)

    def row(self, fault_key: str) -> FcmRow:
        for r in self.rows:
            if r.key == fault_key:
                return r
        raise UnknownFault(fault_key)

    def has_row(self, fault_key: str) -> bool:
        return any(r.key == fault_key for r in self.rows)


def _make_row(record: FaultRecord, iv: Decimal,
              applied: tuple[tuple[str, Decimal], ...]) -> FcmRow:
    before = criticality_before(record.probability, iv)
    after = fault_criticality(record.probability, iv, [p for _, p in applied])
    return FcmRow(
        fault=record.qualified_id,
        probability=record.probability,
        impact_value=iv,
        criticality_before=before,
        rank_before=rank(before),
        guards=applied,
        criticality_after=after,
        rank_after=rank(after),
    )


def build_fcm(project: Project, graph: FaultTraceabilityGraph | None = None) -> Fcm:
    """One row per extracted fault, sorted by qualified id, revision 0.

    The guards column starts from the FMEA guard columns (when the project
    pre-applies them, each FMEA-declared guard is applied to every fault it
    is a candidate for) plus the project's accepted what-if assignments.
    """
    faults = extract_faults(project)
    if graph is None:
        graph = build_traceability_graph(project, faults)

    candidates: dict[str, tuple[str, ...]] = {}
    catalog = {g.id: (g.description, g.probability) for g in project.guards}

    applied_map: dict[str, list[str]] = {}
    for record in faults:
        cand = guard_candidates(project, record.key, faults)
        candidates[record.key] = tuple(g.id for g in cand)
        applied_map[record.key] = [g.id for g in cand] if project.preapply_fmea_guards else []

    for fault_key, guard_id in project.assignments:
        if guard_id not in candidates.get(fault_key, ()):
            raise GuardNotApplicable(f"{guard_id!r} is not a candidate for {fault_key!r}")
        if guard_id in applied_map[fault_key]:
            raise GuardAlreadyApplied(f"{guard_id!r} already applied to {fault_key!r}")
        applied_map[fault_key].append(guard_id)

    rows = tuple(
        _make_row(
            record,
            impact_value(graph, record.key).value,
            tuple((gid, catalog[gid][1]) for gid in applied_map[record.key]),
        )
        for record in faults
    )
    return Fcm(rows=rows, project_name=project.name, revision=0,
               candidates=candidates, guard_catalog=catalog)


def apply_guard(matrix: Fcm, fault_key: str, guard_id: str) -> Fcm:
    """Apply one candidate guard to one fault; only that row changes."""
    target = matrix.row(fault_key)
    if guard_id not in matrix.candidates.get(fault_key, ()):
        raise GuardNotApplicable(f"{guard_id!r} is not a candidate for {fault_key!r}")
    if any(gid == guard_id for gid, _ in target.guards):
        raise GuardAlreadyApplied(f"{guard_id!r} already applied to {fault_key!r}")

    probability = matrix.guard_catalog[guard_id][1]
    guards = target.guards + ((guard_id, probability),)
    after = target.criticality_before - sum((p for _, p in guards), ZERO)
    new_row = replace(target, guards=guards, criticality_after=after, rank_after=rank(after))
    rows = tuple(new_row if r.key == fault_key else r for r in matrix.rows)
    return replace(matrix, rows=rows, revision=matrix.revision + 1)


def remove_guard(matrix: Fcm, fault_key: str, guard_id: str) -> Fcm:
    """Undo one applied guard; the inverse of apply_guard."""
    target = matrix.row(fault_key)
    if not any(gid == guard_id for gid, _ in target.guards):
        raise GuardNotApplied(f"{guard_id!r} is not applied to {fault_key!r}")
    guards = tuple((gid, p) for gid, p in target.guards if gid != guard_id)
    after = target.criticality_before - sum((p for _, p in guards), ZERO)
    new_row = replace(target, guards=guards, criticality_after=after, rank_after=rank(after))
    rows = tuple(new_row if r.key == fault_key else r for r in matrix.rows)
    return replace(matrix, rows=rows, revision=matrix.revision + 1)


class UnresolvedReason(enum.Enum):
    NO_GUARD_AVAILABLE = "NoGuardAvailable"
    GUARD_INSUFFICIENT = "GuardInsufficient"
    PARTIALLY_MITIGATED = "PartiallyMitigated"


def unresolved_faults(matrix: Fcm) -> list[tuple[FcmRow, UnresolvedReason]]:
    """Rows still ranked above No Effect, with why they are still open.

    Most severe first: rank_after descending, then criticality_after
    descending, then qualified id.
    """
    out: list[tuple[FcmRow, UnresolvedReason]] = []
    for row in matrix.rows:
        if row.rank_after is RankBand.NO_EFFECT:
            continue
        if not row.guards:
            reason = UnresolvedReason.NO_GUARD_AVAILABLE
        elif row.rank_after == row.rank_before:
            reason = UnresolvedReason.GUARD_INSUFFICIENT
        else:
            reason = UnresolvedReason.PARTIALLY_MITIGATED
        out.append((row, reason))
    out.sort(key=lambda item: (-item[0].rank_after, -item[0].criticality_after,
                               item[0].fault.sort_key()))
    return out


@dataclass(frozen=True)
class IterationReport:
    converged: bool
    trajectories: dict[str, list[RankBand]]
    deltas: tuple[tuple[int, tuple[str, ...]], ...]  # (revision, changed faults)


def iteration_report(history: list[Fcm]) -> IterationReport:
    """Per-fault rank trajectory across matrix revisions."""
    if not history:
        raise EmptyHistory("no matrix revisions")
    trajectories: dict[str, list[RankBand]] = {row.key: [] for row in history[0].rows}
    for matrix in history:
        for row in matrix.rows:
            trajectories[row.key].append(row.rank_after)
    deltas = []
    for previous, current in zip(history, history[1:]):
        before = {row.key: row for row in previous.rows}
        changed = tuple(row.key for row in current.rows if before[row.key] != row)
        deltas.append((current.revision, changed))
    converged = not unresolved_faults(history[-1])
    return IterationReport(converged=converged, trajectories=trajectories,
                           deltas=tuple(deltas))


_SEVERITY_RE = re.compile(r"^S[0-3]$")
_EXPOSURE_RE = re.compile(r"^E[0-4]$")
_CONTROLLABILITY_RE = re.compile(r"^C[0-3]$")


@dataclass(frozen=True)
class IsoAnnotation:
    fault: str
    severity: str
    exposure: str
    controllability: str


@dataclass(frozen=True)
class IsoReport:
    pairs: tuple[tuple[str, RankBand, str], ...]  # (fault, rank_before, severity)
    inversions: tuple[tuple[str, str], ...]  # (higher-severity fault, lower-severity fault)


def iso_crosscheck(matrix: Fcm, annotations: list[IsoAnnotation]) -> IsoReport:
    """Compare matrix ranks against severity/exposure/controllability levels.

    Flags an inversion whenever a fault with strictly higher severity ranks
    strictly lower (before guards) than a fault with lower severity. Pure
    report; never mutates the matrix.
    """
    pairs: list[tuple[str, RankBand, str]] = []
    for a in annotations:
        if not _SEVERITY_RE.match(a.severity):
            raise DomainError(f"bad severity level {a.severity!r}")
        if not _EXPOSURE_RE.match(a.exposure):
            raise DomainError(f"bad exposure level {a.exposure!r}")
        if not _CONTROLLABILITY_RE.match(a.controllability):
            raise DomainError(f"bad controllability level {a.controllability!r}")
        pairs.append((a.fault, matrix.row(a.fault).rank_before, a.severity))

    inversions = []
    for fault_a, rank_a, severity_a in pairs:
        for fault_b, rank_b, severity_b in pairs:
            if severity_a > severity_b and rank_a < rank_b:
                inversions.append((fault_a, fault_b))
    return IsoReport(pairs=tuple(pairs), inversions=tuple(inversions))


# ---------------------------------------------------------------------------
# Rendering (Table-1 column order: Fault, P, C, Rank, SG, P(SGs), IV, FC, Rank)
# ---------------------------------------------------------------------------

CSV_HEADER = ["Fault", "P", "C", "Rank", "SG", "P(SGs)", "IV", "FC", "Rank_after"]


def _row_cells(matrix: Fcm, row: FcmRow) -> list[str]:
    return [
        row.key,
        fmt(row.probability),
        fmt(row.criticality_before),
        row.rank_before.display,
        ";".join(matrix.guard_catalog[gid][0] for gid, _ in row.guards),
        ";".join(fmt(p) for _, p in row.guards),
        fmt(row.impact_value),
        fmt(row.criticality_after),
        row.rank_after.display,
    ]


def fcm_to_csv(matrix: Fcm) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in matrix.rows:
        writer.writerow(_row_cells(matrix, row))
    return buffer.getvalue()


def row_to_json(matrix: Fcm, row: FcmRow) -> dict:
    return {
        "fault": row.key,
        "probability": fmt(row.probability),
        "impact_value": fmt(row.impact_value),
        "criticality_before": fmt(row.criticality_before),
        "rank_before": row.rank_before.display,
        "guards": [
            {"id": gid, "description": matrix.guard_catalog[gid][0], "probability": fmt(p)}
            for gid, p in row.guards
        ],
        "candidates": [
            {"id": gid, "description": matrix.guard_catalog[gid][0],
             "probability": fmt(matrix.guard_catalog[gid][1])}
            for gid in matrix.candidates.get(row.key, ())
        ],
        "criticality_after": fmt(row.criticality_after),
        "rank_after": row.rank_after.display,
    }


def fcm_to_json_rows(matrix: Fcm) -> list[dict]:
    return [row_to_json(matrix, row) for row in matrix.rows]


def canonical_json(payload) -> str:
    """The one JSON renderer shared by the CLI and the service."""
    return json.dumps(payload, indent=2) + "\n"


def fcm_to_text(matrix: Fcm) -> str:
    table = [CSV_HEADER] + [_row_cells(matrix, row) for row in matrix.rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(CSV_HEADER))]
    lines = []
    for line_no, cells in enumerate(table):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip())
        if line_no == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"
