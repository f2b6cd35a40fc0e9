"""
Command-line surface: exit codes and the files each command writes.
"""
import json

import pandas as pd
import pytest

from src.cli import run
from src.cli.main import limiter_counterpart
from src.scenario.fixtures import toy3
from src.tds.events import Event, EventKind


def test_list_fixtures(capsys):
    assert run(["list-fixtures"]) == 0
    out = capsys.readouterr().out
    assert "toy3\t" in out
    assert "scenario2_limiter_staggered\t" in out


def test_validate_fixture(capsys):
    assert run(["validate", "--fixture", "toy3"]) == 0
    assert "name: toy3" in capsys.readouterr().out


def test_help_exits_cleanly():
    assert run(["--help"]) == 0


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["validate"],
    ["validate", "--fixture", "toy3", "--config", "x.json"],
    ["validate", "--fixture", "nope"],
    ["feasibility", "--fixture", "toy3", "--load-factors", "1.0,abc"],
])
def test_usage_and_config_errors(argv):
    assert run(argv) == 1


def test_invalid_scenario_reports_fields(tmp_path, capsys):
    data = toy3()
    data["inverters"][0]["bus"] = "42"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    assert run(["validate", "--config", str(path)]) == 1
    assert "unknown bus '42'" in capsys.readouterr().err


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert run(["validate", "--config", str(path)]) == 1


def test_equilibrium_outputs(tmp_path):
    assert run(["equilibrium", "--fixture", "toy3", "--out", str(tmp_path)]) == 0
    nodes = pd.read_csv(tmp_path / "toy3" / "equilibrium" / "nodes.csv")
    assert list(nodes.columns) == ["node", "v", "theta", "p_load", "q_load"]
    summary = json.loads((tmp_path / "toy3" / "equilibrium" / "summary.json").read_text())
    assert summary["f"] < 1.0
    assert summary["residuals"]["nodal"] < 1e-8


def test_feasibility_then_plot_data(tmp_path):
    out = str(tmp_path)
    assert run(["feasibility", "--fixture", "toy3", "--out", out, "--load-factors", "1.0,1.02", "--workers", "2"]) == 0
    folder = tmp_path / "toy3" / "feasibility"
    assert (folder / "map_lf_1.000.csv").exists()
    assert (folder / "map_lf_1.020.csv").exists()
    summary = json.loads((folder / "summary.json").read_text())
    assert [m["min_shed"] for m in summary["maps"]] == [0.0, 0.0]

    assert run(["plot-data", "--name", "toy3", "--layout", "fig6-style", "--out", out]) == 0
    scatter = pd.read_csv(tmp_path / "toy3" / "plot" / "fig6-style_scatter.csv")
    assert "security_box" in set(scatter["series"])
    assert "lf_1.020_feasible" in set(scatter["series"])


def test_plot_data_needs_prior_output(tmp_path):
    assert run(["plot-data", "--name", "toy3", "--layout", "fig9-style", "--out", str(tmp_path)]) == 1


def test_compare_needs_power_regulator_script(tmp_path):
    assert run(["compare", "--fixture", "toy3", "--out", str(tmp_path)]) == 1


def test_simulate_writes_trace_and_events(tmp_path):
    data = toy3()
    data["engine"] = {"kind": "simulate", "t_end": 0.2, "dt": 1e-3}
    data["output"] = {"output_rate_hz": 100.0}
    data["events"] = [{"time": 0.1, "kind": "load_step", "bus": "2", "dp": 0.01, "dq": 0.0}]
    path = tmp_path / "toy_step.json"
    path.write_text(json.dumps(data))
    assert run(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 0
    trace = pd.read_csv(tmp_path / "toy3" / "simulate" / "trace.csv")
    assert len(trace) == 21
    sidecar = json.loads((tmp_path / "toy3" / "simulate" / "events.json").read_text())
    assert sidecar["completed"]
    assert [e["kind"] for e in sidecar["events"]] == ["load_step"]


def test_limiter_counterpart_swaps_enables():
    events = [
        Event(time=1.0, kind=EventKind.SET_CAPACITY, inverter="G1", s_ref=0.1),
        Event(time=1.0, kind=EventKind.ENABLE_POWER_REG, inverter="G1"),
    ]
    swapped = limiter_counterpart(events)
    assert swapped[0] == events[0]
    assert swapped[1].kind is EventKind.ENABLE_CURRENT_LIMITER
    assert swapped[1].inverter == "G1"
    assert swapped[1].i_max is None
