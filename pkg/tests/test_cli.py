from __future__ import annotations

import json

import pytest

from critmatrix.cli import main

from conftest import FIXTURES

PLATOONING = str(FIXTURES / "platooning.json")
WHATIF = str(FIXTURES / "platooning_whatif.json")
LIDAR = "Lidar Sensor Failure.[Autonomous Car Platooning.FMEA_0]"


def test_validate_ok(capsys):
    assert main(["validate", PLATOONING]) == 0
    assert capsys.readouterr().out.strip() == "OK"


def test_validate_broken_file(tmp_path, capsys):
    data = json.loads((FIXTURES / "platooning.json").read_text())
    data["artifacts"][1]["body"]["rows"][0]["probability_of_occurrence"] = "1.3"
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(data))
    assert main(["validate", str(path)]) == 1
    assert "probability" in capsys.readouterr().err


def test_fcm_csv_matches_expected_and_exits_3(capsys):
    code = main(["fcm", PLATOONING, "--format", "csv"])
    out = capsys.readouterr().out
    assert code == 3  # High-ranked rows remain
    assert out == (FIXTURES / "expected" / "platooning_fcm.csv").read_text()
    assert out.count("\n") == 26  # header + 25 rows


def test_fcm_text_format(capsys):
    code = main(["fcm", PLATOONING])
    out = capsys.readouterr().out
    assert code == 3
    assert out.splitlines()[0].startswith("Fault")
    assert "Very High" in out


def test_fcm_json_format(capsys):
    main(["fcm", PLATOONING, "--format", "json"])
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 25
    lidar = next(r for r in rows if r["fault"] == LIDAR)
    assert lidar["criticality_after"] == "-0.22"
    assert lidar["rank_after"] == "No Effect"


def test_fcm_exit_zero_when_fully_mitigated(tmp_path, capsys):
    # Every fault at probability zero and no relations: nothing unresolved.
    project = {
        "name": "mitigated",
        "systems": [{"name": "Sys"}],
        "artifacts": [{
            "id": "FMEA_0", "system": "Sys",
            "body": {"kind": "fmea", "rows": [{
                "item": "unit", "failure_mode": "FM", "causal_factors": "c",
                "immediate_effect": "e", "system_effect": "SE",
                "probability_of_occurrence": "0",
            }]},
        }],
    }
    path = tmp_path / "mitigated.json"
    path.write_text(json.dumps(project))
    assert main(["fcm", str(path), "--format", "csv"]) == 0


def test_whatif_prints_before_and_after(capsys):
    code = main(["whatif", WHATIF, "--fault", LIDAR,
                 "--guard", "SG-reduce-speed-exit-platooning"])
    out = capsys.readouterr().out
    assert code == 3
    assert "before:" in out and "after:" in out
    assert '"criticality_after": "0.13"' in out
    assert '"criticality_after": "-0.19"' in out


def test_whatif_bad_guard(capsys):
    assert main(["whatif", WHATIF, "--fault", LIDAR, "--guard", "nope"]) == 1


def test_trace_prints_scope(capsys):
    fault = "Detection Failure.[Autonomous Car Platooning.FMEA_0]"
    assert main(["trace", PLATOONING, fault]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 7
    assert "Car Collision.[Autonomous Car Platooning.ETA_0]" in lines


def test_trace_unknown_fault(capsys):
    assert main(["trace", PLATOONING, "Ghost.[X.FMEA_9]"]) == 1


def test_sim_collision_exit_4(capsys):
    code = main(["sim", str(FIXTURES / "scenario1.json")])
    out = capsys.readouterr().out
    assert code == 4
    assert out.startswith("COLLISION")


def test_sim_safe_exit_0(capsys):
    code = main(["sim", str(FIXTURES / "scenario2.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("SAFE")


def test_sim_with_bindings_and_trace(tmp_path, capsys):
    trace_path = tmp_path / "trace.csv"
    code = main(["sim", str(FIXTURES / "fog.json"), "--fcm", PLATOONING,
                 "--trace", str(trace_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "binding fired" in out
    assert trace_path.read_text().startswith("time,vehicle,lane")


def test_sim_fog_without_fcm_collides():
    assert main(["sim", str(FIXTURES / "fog.json")]) == 4


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2


def test_missing_file_is_error(capsys):
    assert main(["fcm", "no-such-file.json"]) == 1


def test_report_writes_bundle(tmp_path, capsys):
    code = main(["report", PLATOONING, "-o", str(tmp_path / "out"),
                 "--scenario", str(FIXTURES / "scenario1.json")])
    assert code == 0
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert {"fcm.csv", "rank_distribution.png", "criticality_waterfall.png",
            "traceability_graph.png", "min_gap_scenario1.png"} <= names
    csv_text = (tmp_path / "out" / "fcm.csv").read_text()
    assert csv_text == (FIXTURES / "expected" / "platooning_fcm.csv").read_text()
