"""Command-line entry points.

Exit codes form the machine-checkable contract:
  0  success (matrix fully mitigated / simulation collision-free)
  1  error (bad file, unknown fault, internal failure)
  2  usage
  3  unresolved faults remain in the matrix
  4  the simulated scenario ended in a collision
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .criticality import (
    apply_guard,
    build_fcm,
    canonical_json,
    fcm_to_csv,
    fcm_to_json_rows,
    fcm_to_text,
    row_to_json,
    unresolved_faults,
)
from .decimals import fmt
from .errors import CritmatrixError, ValidationError
from .model import load_project
from .relations import build_traceability_graph, propagation_scope
from .sim import guard_bindings, load_scenario, run_scenario, trace_to_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_UNRESOLVED = 3
EXIT_COLLISION = 4

DEFAULT_PORT = 8437


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critmatrix",
        description="Fault criticality workbench: composite hazard analysis, "
                    "criticality matrix, and platoon fault-injection simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a project file")
    p.add_argument("project")

    p = sub.add_parser("fcm", help="print the fault criticality matrix")
    p.add_argument("project")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")

    p = sub.add_parser("whatif", help="apply one guard and show the row before/after")
    p.add_argument("project")
    p.add_argument("--fault", required=True)
    p.add_argument("--guard", required=True)

    p = sub.add_parser("trace", help="print a fault's propagation scope")
    p.add_argument("project")
    p.add_argument("fault")

    p = sub.add_parser("sim", help="run a simulation scenario")
    p.add_argument("scenario")
    p.add_argument("--fcm", metavar="PROJECT",
                   help="enable the scenario's guard bindings, validated "
                        "against this project's matrix")
    p.add_argument("--trace", metavar="CSV", help="write the step trace as CSV")
    p.add_argument("--plot", metavar="PNG", help="write a minimum-gap chart")

    p = sub.add_parser("serve", help="run the local JSON service")
    p.add_argument("project")
    p.add_argument("--port", type=int, default=None,
                   help=f"default {DEFAULT_PORT}; CRITMATRIX_PORT overrides it, "
                        "the flag wins over both")
    p.add_argument("--iso-annotations", metavar="FILE",
                   help="severity annotations for /api/report/iso")

    p = sub.add_parser("report", help="write the matrix, figures, and scenario charts")
    p.add_argument("project")
    p.add_argument("-o", "--out", required=True, metavar="DIR")
    p.add_argument("--scenario", action="append", default=[], metavar="FILE",
                   help="also render a minimum-gap chart for this scenario "
                        "(repeatable)")

    return parser


def _cmd_validate(args) -> int:
    try:
        load_project(args.project)
    except ValidationError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    print("OK")
    return EXIT_OK


def _cmd_fcm(args) -> int:
    project = load_project(args.project)
    matrix = build_fcm(project)
    if args.format == "csv":
        sys.stdout.write(fcm_to_csv(matrix))
    elif args.format == "json":
        sys.stdout.write(canonical_json(fcm_to_json_rows(matrix)))
    else:
        sys.stdout.write(fcm_to_text(matrix))
    return EXIT_UNRESOLVED if unresolved_faults(matrix) else EXIT_OK


def _cmd_whatif(args) -> int:
    project = load_project(args.project)
    before = build_fcm(project)
    after = apply_guard(before, args.fault, args.guard)
    print("before:", canonical_json(row_to_json(before, before.row(args.fault))), end="")
    print("after: ", canonical_json(row_to_json(after, after.row(args.fault))), end="")
    return EXIT_UNRESOLVED if unresolved_faults(after) else EXIT_OK


def _cmd_trace(args) -> int:
    project = load_project(args.project)
    graph = build_traceability_graph(project)
    for fault in propagation_scope(graph, args.fault):
        print(fault)
    return EXIT_OK


def _cmd_sim(args) -> int:
    scenario = load_scenario(args.scenario)
    bindings = None
    if args.fcm:
        matrix = build_fcm(load_project(args.fcm))
        bindings = guard_bindings(matrix, list(scenario.bindings))
    outcome = run_scenario(scenario.config, list(scenario.events), scenario.duration,
                           bindings=bindings)
    if args.trace:
        Path(args.trace).write_text(trace_to_csv(outcome), encoding="utf-8")
    if args.plot:
        from .report import fig_min_gap  # matplotlib import only when needed

        fig = fig_min_gap(outcome, title=f"Minimum gap: {Path(args.scenario).stem}",
                          vehicle_length=scenario.config.vehicle_length)
        fig.savefig(args.plot, dpi=150)

    if outcome.collision:
        time, (vehicle, into) = outcome.first_collision
        print(f"COLLISION at t={time:.1f} s: vehicle {vehicle} into {into}")
    else:
        print("SAFE: no collision")
    if outcome.min_gap != float("inf"):
        print(f"min gap: {outcome.min_gap:.3f} m")
    for fault in outcome.fired_bindings:
        print(f"binding fired: {fault}")
    for fault in outcome.redundant_bindings:
        print(f"redundant binding (already No Effect): {fault}")
    return EXIT_COLLISION if outcome.collision else EXIT_OK


def _cmd_serve(args) -> int:
    from .service import serve  # deferred: pulls in the HTTP stack

    port = args.port
    if port is None:
        port = int(os.environ.get("CRITMATRIX_PORT", DEFAULT_PORT))
    try:
        serve(args.project, port, args.iso_annotations)
    except OSError as exc:
        print(f"cannot bind port {port}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import write_report

    project = load_project(args.project)
    graph = build_traceability_graph(project)
    matrix = build_fcm(project, graph)
    outcomes = {}
    for path in args.scenario:
        scenario = load_scenario(path)
        outcomes[Path(path).stem] = run_scenario(
            scenario.config, list(scenario.events), scenario.duration)
    for written in write_report(matrix, graph, args.out, outcomes):
        print(written)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "fcm": _cmd_fcm,
    "whatif": _cmd_whatif,
    "trace": _cmd_trace,
    "sim": _cmd_sim,
    "serve": _cmd_serve,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except CritmatrixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
