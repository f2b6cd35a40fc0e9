"""
End-to-end runs of the built-in feeder scenarios.
"""
import numpy as np
import pytest

from src.cli.main import limiter_counterpart
from src.scenario import get_fixture, parse_scenario
from src.tds.engine import SimConfig, compare_limiter, deviation_summary, simulate
from src.tds.events import EventKind
from src.tds.model import Fidelity
from src.tds.trace import inverter_column

INVERTERS = ("G1", "G2", "G3")


def _run(name, **overrides):
    scenario = parse_scenario(get_fixture(name))
    config = scenario.sim_config(**overrides)
    return simulate(scenario.model(config.fidelity.value), config, scenario.events)


@pytest.mark.slow
def test_power_regulators_hold_the_new_capacities():
    trace = _run("scenario1")
    assert trace.completed
    # G2 is cut to 0.6 MVA at 8 s and G1 takes over at 1.2 MVA after the 12 s load step
    assert float(trace.at(11.9)[inverter_column("G2", "s_m")]) == pytest.approx(0.06, rel=5e-3)
    assert float(trace.at(20.0)[inverter_column("G1", "s_m")]) == pytest.approx(0.12, rel=5e-3)
    assert float(trace.at(20.0)[inverter_column("G2", "s_m")]) == pytest.approx(0.06, rel=5e-3)
    summary = deviation_summary(trace, 8.0)
    assert summary["max_df"] < 1e-3
    assert summary["max_dv"] < 1e-2


@pytest.mark.slow
@pytest.mark.parametrize("name", ["scenario2_1", "scenario2_2"])
def test_vf_regulator_brings_the_overload_back_into_band(name):
    trace = _run(name)
    assert trace.completed
    before = deviation_summary(trace, 12.0, 15.99)
    assert before["max_df"] > 0.01 or before["max_dv"] > 0.05

    # the frequency integrator settles on the band edge
    final = deviation_summary(trace, 23.5)
    assert final["max_df"] <= 0.0105
    assert final["max_dv"] <= 0.05

    kinds = {e.kind for e in trace.events}
    assert EventKind.SHED not in kinds
    assert EventKind.SHED_REQUEST not in kinds

    idle = trace.window(0.0, 15.99)
    active = trace.window(17.0, 24.0)
    for inv in INVERTERS:
        assert np.all(idle[inverter_column(inv, "dw2")] == 0.0)
        assert np.all(idle[inverter_column(inv, "dv2")] == 0.0)
        assert np.all(active[inverter_column(inv, "state_f")] == 1)
        assert np.all(active[inverter_column(inv, "dw2")] > 0.0)


@pytest.mark.slow
def test_limiter_baseline_deviates_more_than_power_regulator():
    scenario = parse_scenario(get_fixture("scenario1"))
    config = SimConfig(t_end=14.0, dt=1e-4, fidelity=Fidelity.FULL)
    frame = compare_limiter(scenario.model(Fidelity.FULL.value), config, scenario.events,
                            limiter_counterpart(scenario.events), t_start=8.0)
    runs = frame.set_index("run")
    assert runs["completed"].all()
    assert runs.loc["current_limiter", "max_dv"] > runs.loc["power_regulator", "max_dv"]


@pytest.mark.slow
def test_simultaneous_limiters_collapse_before_staggered_ones():
    simultaneous = _run("scenario2_limiter_simultaneous", dt=1e-4)
    staggered = _run("scenario2_limiter_staggered", dt=1e-4)
    for trace in (simultaneous, staggered):
        assert not trace.completed
        assert len(trace.events_of(EventKind.COLLAPSE)) == 1
    t_simultaneous = simultaneous.events_of(EventKind.COLLAPSE)[0].time
    t_staggered = staggered.events_of(EventKind.COLLAPSE)[0].time
    assert 12.0 <= t_simultaneous < 12.5
    assert t_staggered > t_simultaneous + 0.5
