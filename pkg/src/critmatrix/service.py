"""Local JSON service exposing the workbench over HTTP.

One project per process. Reads are served from the newest matrix revision;
mutations are funneled through a single lock and carry optimistic revision
checks: a request with a stale revision is rejected with 409 and changes
nothing. The on-disk project file is only written by POST /api/project/save.

Endpoints
---------
GET    /api/project              project document
GET    /api/fcm                  matrix rows (revision in X-Critmatrix-Revision)
GET    /api/fcm/unresolved       rows still ranked above No Effect
POST   /api/fcm/guard            {fault, guard, revision?} apply a candidate guard
DELETE /api/fcm/guard            {fault, guard, revision?} undo an applied guard
GET    /api/trace/{qualified-id} propagation scope (id URL-escaped)
POST   /api/sim/run              {scenario|scenario_file, use_bindings?, include_trace?}
GET    /api/report/iteration     rank trajectories over the session's revisions
GET    /api/report/iso           severity cross-check (needs --iso-annotations)
POST   /api/project/save         persist the session state to the project file
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote

from . import criticality as crit
from .criticality import Fcm, IsoAnnotation, build_fcm, canonical_json
from .decimals import fmt
from .errors import (
    CritmatrixError,
    DomainError,
    DuplicateRelation,
    EndpointNotFound,
    GuardAlreadyApplied,
    GuardNotApplicable,
    GuardNotApplied,
    GuardNotInRow,
    ParseError,
    StaleRevision,
    UnknownFault,
    ValidationError,
)
from .model import Project, load_project, project_to_json, save_project
from .relations import build_traceability_graph, propagation_scope
from .sim import guard_bindings, load_scenario, parse_scenario, run_scenario

_STATUS = {
    ParseError: 400,
    ValidationError: 400,
    DomainError: 400,
    GuardNotApplicable: 400,
    GuardNotInRow: 400,
    UnknownFault: 404,
    EndpointNotFound: 404,
    GuardAlreadyApplied: 409,
    GuardNotApplied: 409,
    StaleRevision: 409,
    DuplicateRelation: 409,
}


def _json_float(value: float):
    return None if math.isinf(value) else value


class Session:
    """Project state plus the matrix revision history, with one writer."""

    def __init__(self, project: Project, project_path: Path | None = None,
                 iso_annotations: list[IsoAnnotation] | None = None):
        self.project = project
        self.project_path = project_path
        self.iso_annotations = iso_annotations or []
        self.graph = build_traceability_graph(project)
        self.history: list[Fcm] = [build_fcm(project, self.graph)]
        self.assignments: list[tuple[str, str]] = list(project.assignments)
        self.lock = threading.Lock()

    @property
    def current(self) -> Fcm:
        return self.history[-1]

    def _check_revision(self, payload: dict) -> None:
        revision = payload.get("revision")
        if revision is not None and int(revision) != self.current.revision:
            raise StaleRevision(
                f"revision {revision} is stale, current is {self.current.revision}")

    def apply_guard(self, payload: dict) -> Fcm:
        with self.lock:
            self._check_revision(payload)
            matrix = crit.apply_guard(self.current, payload["fault"], payload["guard"])
            self.history.append(matrix)
            self.assignments.append((payload["fault"], payload["guard"]))
            return matrix

    def remove_guard(self, payload: dict) -> Fcm:
        with self.lock:
            self._check_revision(payload)
            matrix = crit.remove_guard(self.current, payload["fault"], payload["guard"])
            self.history.append(matrix)
            pair = (payload["fault"], payload["guard"])
            if pair in self.assignments:
                self.assignments.remove(pair)
            return matrix

    def save(self) -> Path:
        """Write a project file that reproduces the current matrix on load."""
        if self.project_path is None:
            raise ParseError("session has no backing file")
        with self.lock:
            candidate = replace(self.project, assignments=tuple(self.assignments))
            if build_fcm(candidate).rows != self.current.rows:
                # Pre-applied guards were removed; fall back to the explicit form.
                applied = tuple((row.key, gid) for row in self.current.rows
                                for gid, _ in row.guards)
                candidate = replace(self.project, preapply_fmea_guards=False,
                                    assignments=applied)
            save_project(candidate, self.project_path)
            return self.project_path


def _scenario_from_payload(session: Session, payload: dict):
    if "scenario" in payload:
        scenario = parse_scenario(payload["scenario"])
    elif "scenario_file" in payload:
        path = Path(payload["scenario_file"])
        if not path.exists() and session.project_path is not None:
            path = session.project_path.parent / payload["scenario_file"]
        scenario = load_scenario(path)
    else:
        raise ParseError("need 'scenario' or 'scenario_file'")
    return scenario


def run_sim_payload(session: Session, payload: dict) -> dict:
    scenario = _scenario_from_payload(session, payload)
    bindings = None
    if payload.get("use_bindings"):
        bindings = guard_bindings(session.current, list(scenario.bindings))
    outcome = run_scenario(scenario.config, list(scenario.events), scenario.duration,
                           bindings=bindings)
    body = {
        "collision": outcome.collision,
        "min_gap": _json_float(outcome.min_gap),
        "first_collision": None if outcome.first_collision is None else {
            "time": outcome.first_collision[0],
            "vehicle": outcome.first_collision[1][0],
            "into": outcome.first_collision[1][1],
        },
        "duration": scenario.duration,
        "use_bindings": bool(payload.get("use_bindings")),
        "fired_bindings": list(outcome.fired_bindings),
        "redundant_bindings": list(outcome.redundant_bindings),
        "events": [event for step in outcome.trace for event in step.events],
    }
    if payload.get("include_trace"):
        body["trace"] = [
            {"time": step.time,
             "vehicles": [{"id": v.id, "lane": v.lane, "position": v.position,
                           "speed": v.speed, "acceleration": v.acceleration,
                           "mode": v.mode.value} for v in step.vehicles]}
            for step in outcome.trace
        ]
    else:
        # Enough for a gap-over-time chart without the full state dump.
        body["min_gap_series"] = _min_gap_series(outcome)
    return body


def _min_gap_series(outcome) -> list[list[float]]:
    series = []
    for step in outcome.trace:
        per_lane: dict[int, list] = {}
        for v in step.vehicles:
            per_lane.setdefault(v.lane, []).append(v)
        worst = math.inf
        for vehicles in per_lane.values():
            ordered = sorted(vehicles, key=lambda v: v.position)
            for behind, ahead in zip(ordered, ordered[1:]):
                worst = min(worst, ahead.position - 4.5 - behind.position)
        for appeared, lane, position in outcome.obstacles:
            if appeared > step.time:
                continue
            for v in step.vehicles:
                if v.lane == lane and position > v.position - 4.5:
                    worst = min(worst, position - v.position)
        if worst != math.inf:
            series.append([round(step.time, 3), worst])
    return series


def iteration_payload(session: Session) -> dict:
    report = crit.iteration_report(session.history)
    return {
        "converged": report.converged,
        "revisions": len(session.history),
        "trajectories": {fault: [band.display for band in bands]
                         for fault, bands in report.trajectories.items()},
        "deltas": [{"revision": revision, "changed": list(changed)}
                   for revision, changed in report.deltas],
    }


def iso_payload(session: Session) -> dict:
    report = crit.iso_crosscheck(session.current, session.iso_annotations)
    return {
        "pairs": [{"fault": fault, "rank_before": band.display, "severity": severity}
                  for fault, band, severity in report.pairs],
        "inversions": [{"higher_severity": a, "lower_severity": b}
                       for a, b in report.inversions],
    }


def load_iso_annotations(path: str | Path) -> list[IsoAnnotation]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    return [
        IsoAnnotation(fault=a["fault"], severity=a["severity"],
                      exposure=a["exposure"], controllability=a["controllability"])
        for a in data.get("annotations", [])
    ]


class _Handler(BaseHTTPRequestHandler):
    server_version = "critmatrix"
    session: Session  # set by make_server

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    # -- plumbing -------------------------------------------------------

    def _send(self, status: int, body: str, revision: int | None = None) -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        if revision is not None:
            self.send_header("X-Critmatrix-Revision", str(revision))
        self.end_headers()
        self.wfile.write(data)

    def _payload(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, "request body") from exc

    def _dispatch(self, handler) -> None:
        try:
            handler()
        except CritmatrixError as exc:
            status = _STATUS.get(type(exc), 500)
            self._send(status, canonical_json(exc.payload()))
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, canonical_json({"code": "InternalError", "message": str(exc)}))

    # -- verbs ----------------------------------------------------------

    def do_GET(self) -> None:
        self._dispatch(self._get)

    def do_POST(self) -> None:
        self._dispatch(self._post)

    def do_DELETE(self) -> None:
        self._dispatch(self._delete)

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def _get(self) -> None:
        session = self.session
        path = self.path.split("?", 1)[0]
        matrix = session.current
        if path == "/api/project":
            self._send(200, canonical_json(project_to_json(session.project)),
                       matrix.revision)
        elif path == "/api/fcm":
            self._send(200, canonical_json(crit.fcm_to_json_rows(matrix)), matrix.revision)
        elif path == "/api/fcm/unresolved":
            body = [
                {"fault": row.key, "reason": reason.value,
                 "rank_after": row.rank_after.display,
                 "criticality_after": fmt(row.criticality_after)}
                for row, reason in crit.unresolved_faults(matrix)
            ]
            self._send(200, canonical_json(body), matrix.revision)
        elif path.startswith("/api/trace/"):
            fault = unquote(path[len("/api/trace/"):])
            scope = propagation_scope(session.graph, fault)
            self._send(200, canonical_json({"fault": fault, "scope": scope}),
                       matrix.revision)
        elif path == "/api/report/iteration":
            self._send(200, canonical_json(iteration_payload(session)), matrix.revision)
        elif path == "/api/report/iso":
            self._send(200, canonical_json(iso_payload(session)), matrix.revision)
        else:
            self._send(404, canonical_json({"code": "NotFound", "message": self.path}))

    def _post(self) -> None:
        session = self.session
        path = self.path.split("?", 1)[0]
        if path == "/api/fcm/guard":
            payload = self._payload()
            matrix = session.apply_guard(payload)
            body = {"revision": matrix.revision,
                    "row": crit.row_to_json(matrix, matrix.row(payload["fault"]))}
            self._send(200, canonical_json(body), matrix.revision)
        elif path == "/api/sim/run":
            body = run_sim_payload(session, self._payload())
            self._send(200, canonical_json(body), session.current.revision)
        elif path == "/api/project/save":
            saved = session.save()
            self._send(200, canonical_json({"saved": str(saved)}),
                       session.current.revision)
        else:
            self._send(404, canonical_json({"code": "NotFound", "message": self.path}))

    def _delete(self) -> None:
        session = self.session
        path = self.path.split("?", 1)[0]
        if path == "/api/fcm/guard":
            payload = self._payload()
            matrix = session.remove_guard(payload)
            body = {"revision": matrix.revision,
                    "row": crit.row_to_json(matrix, matrix.row(payload["fault"]))}
            self._send(200, canonical_json(body), matrix.revision)
        else:
            self._send(404, canonical_json({"code": "NotFound", "message": self.path}))


def make_server(project_path: str | Path, port: int = 0,
                iso_annotations_path: str | Path | None = None) -> ThreadingHTTPServer:
    """Build a ready-to-serve HTTP server bound to 127.0.0.1:port."""
    project = load_project(project_path)
    annotations = (load_iso_annotations(iso_annotations_path)
                   if iso_annotations_path else None)
    session = Session(project, Path(project_path), annotations)
    handler = type("BoundHandler", (_Handler,), {"session": session})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(project_path: str | Path, port: int,
          iso_annotations_path: str | Path | None = None) -> None:
    server = make_server(project_path, port, iso_annotations_path)
    host, bound_port = server.server_address[:2]
    print(f"critmatrix service on http://{host}:{bound_port}/api/fcm")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
