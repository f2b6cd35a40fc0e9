"""
Time-domain engine: initialization, events, regulators, shedding, trips and collapse.
"""
import numpy as np
import pandas as pd
import pytest

from src.equilibrium.solver import solve_droop_equilibrium
from src.scenario.loader import parse_scenario
from src.tds.engine import (
    SimConfig,
    apply_event,
    compare_limiter,
    deviation_summary,
    initialize,
    simulate,
)
from src.tds.events import Event, EventKind, sort_events
from src.tds.model import Fidelity, LimiterSetting
from src.tds.shedding import ShedPolicy, ShedStatus, shed_policy_executor
from src.tds.steady_state import detect_steady_state
from src.tds.trace import SimTrace, inverter_column
from src.utils.errors import ConfigurationError, ShedFloorReached, SimulationCollapse


def _config(t_end, **kwargs):
    kwargs.setdefault("dt", 1e-3)
    kwargs.setdefault("output_rate_hz", 100.0)
    return SimConfig(t_end=t_end, **kwargs)


def _final(trace, inverter, name):
    return float(trace.inverter(inverter, name).iloc[-1])


class TestInitialization:
    def test_reduced_starts_at_rest(self, toy_model):
        initial = initialize(toy_model)
        assert initial.derivative_norm < 1e-8
        assert initial.equilibrium.f < 1.0
        assert initial.x.shape == (24,)

    def test_full_initial_state_has_full_layout(self, toy_scenario):
        model = toy_scenario.model(Fidelity.FULL.value)
        initial = initialize(model, _config(0.1, fidelity=Fidelity.FULL))
        assert initial.x.shape == (3 * 17,)
        assert initial.derivative_norm < 1e-6

    @pytest.mark.slow
    def test_full_run_without_events_holds_its_initial_point(self, toy_scenario):
        model = toy_scenario.model(Fidelity.FULL.value)
        trace = simulate(model, _config(1.0, dt=1e-4, fidelity=Fidelity.FULL))
        assert trace.completed
        for inv in ("G1", "G2", "G3"):
            for name in ("p", "q", "w_ref", "v"):
                series = trace.inverter(inv, name).to_numpy()
                assert np.max(np.abs(series - series[0])) < 1e-7

    def test_both_fidelities_start_from_the_same_operating_point(self, toy_scenario):
        reduced = initialize(toy_scenario.model(Fidelity.REDUCED.value))
        full = initialize(toy_scenario.model(Fidelity.FULL.value), _config(0.1, fidelity=Fidelity.FULL))
        np.testing.assert_allclose(full.equilibrium.p_inv, reduced.equilibrium.p_inv, atol=1e-6)
        np.testing.assert_allclose(full.equilibrium.q_inv, reduced.equilibrium.q_inv, atol=1e-6)
        assert full.equilibrium.f == pytest.approx(reduced.equilibrium.f, abs=1e-6)

    def test_config_does_not_modify_the_callers_model(self, toy_model):
        tol = toy_model.network_tol
        initial = initialize(toy_model, _config(0.1, network_tol=1e-6, fidelity=Fidelity.FULL))
        assert toy_model.network_tol == tol
        assert toy_model.fidelity is Fidelity.REDUCED
        assert initial.model.network_tol == 1e-6
        assert initial.model.fidelity is Fidelity.FULL


def test_no_events_stays_at_equilibrium(toy_model):
    trace = simulate(toy_model, _config(0.5))
    assert trace.completed
    assert len(trace.data) == 51
    p = trace.data[[inverter_column(i, "p") for i in ("G1", "G2", "G3")]].to_numpy()
    assert np.max(np.abs(p - p[0])) < 1e-7
    assert np.max(np.abs(trace.data["balance_residual"])) < 1e-8


def test_load_step_settles_on_predicted_equilibrium(toy_scenario, toy_model):
    step = Event(time=0.1, kind=EventKind.LOAD_STEP, bus="2", dp=0.01, dq=0.005)
    trace = simulate(toy_model, _config(3.0), [step])
    predicted = solve_droop_equilibrium(toy_scenario.equilibrium_problem().with_load_step({"2": (0.01, 0.005)}))
    for k, inv in enumerate(("G1", "G2", "G3")):
        assert _final(trace, inv, "p") == pytest.approx(predicted.p_inv[k], abs=1e-4)
        assert _final(trace, inv, "q") == pytest.approx(predicted.q_inv[k], abs=1e-4)
        assert _final(trace, inv, "w_ref") == pytest.approx(predicted.f, abs=1e-5)
    # droop sharing: G2 has half the frequency droop of G1
    assert _final(trace, "G2", "p") == pytest.approx(2 * _final(trace, "G1", "p"), rel=1e-3)
    assert detect_steady_state(trace, window=0.5, tol=1e-4) is not None


def test_power_regulator_pulls_output_to_capacity(toy_model):
    s_before = initialize(toy_model).equilibrium.s_inv[0]
    target = 0.8 * s_before
    events = [
        Event(time=0.1, kind=EventKind.SET_CAPACITY, inverter="G1", s_ref=target),
        Event(time=0.1, kind=EventKind.ENABLE_POWER_REG, inverter="G1"),
    ]
    trace = simulate(toy_model, _config(3.1), events)
    assert trace.completed
    assert _final(trace, "G1", "s_m") == pytest.approx(target, rel=5e-3)
    p, q = _final(trace, "G1", "p"), _final(trace, "G1", "q")
    assert p ** 2 + q ** 2 == pytest.approx(target ** 2, rel=1e-2)
    assert _final(trace, "G1", "s_ref") == pytest.approx(target)
    assert _final(trace, "G1", "dw1") < 0.0
    assert trace.inverter("G2", "dw1").abs().max() == 0.0
    # the reallocation barely moves the operating point
    for inv in ("G1", "G2", "G3"):
        w, v = trace.inverter(inv, "w_ref"), trace.inverter(inv, "v")
        assert np.max(np.abs(w - w.iloc[0])) < 2e-3
        assert np.max(np.abs(v - v.iloc[0])) < 1e-2


def test_vf_regulator_idle_inside_deadband(toy_model):
    trace = simulate(toy_model, _config(0.5), [Event(time=0.0, kind=EventKind.ENABLE_VF_REG)])
    for inv in ("G1", "G2", "G3"):
        assert trace.inverter(inv, "dw2").abs().max() == 0.0
        assert trace.inverter(inv, "dv2").abs().max() == 0.0
        assert trace.inverter(inv, "state_f").max() == 0.0


def test_runs_are_deterministic(toy_model):
    events = [Event(time=0.05, kind=EventKind.LOAD_STEP, bus="3", dp=0.005, dq=0.0)]
    first = simulate(toy_model, _config(0.3), events)
    second = simulate(toy_model, _config(0.3), events)
    pd.testing.assert_frame_equal(first.data, second.data)
    assert first.event_records() == second.event_records()


def test_overloaded_inverter_trips(toy_model):
    events = [Event(time=0.1, kind=EventKind.SET_CAPACITY, inverter="G1", s_ref=0.02)]
    trace = simulate(toy_model, _config(0.45), events)
    trips = trace.events_of(EventKind.TRIP)
    assert [e.inverter for e in trips] == ["G1"]
    assert trips[0].time > 0.3
    assert trace.completed


@pytest.fixture
def weak_link():
    return parse_scenario({
        "name": "weak_link",
        "network": {
            "buses": [{"id": "1"}, {"id": "2"}],
            "branches": [{"from_bus": "1", "to_bus": "2", "r": 0.0, "x": 0.5}],
        },
        "loads": [{"bus": "2", "p": 0.1, "q": 0.0}],
        "inverters": [{"id": "G1", "bus": "1", "s_ref": 3.0}],
        "engine": {"kind": "simulate", "t_end": 0.5, "trip_enabled": False},
    })


class TestCollapse:
    step = Event(time=0.1, kind=EventKind.LOAD_STEP, bus="2", dp=2.0, dq=0.0)

    def test_partial_trace_flagged(self, weak_link):
        trace = simulate(weak_link.model(), weak_link.sim_config(dt=1e-3), [self.step])
        assert not trace.completed
        assert trace.failure
        collapse = trace.events_of(EventKind.COLLAPSE)
        assert len(collapse) == 1
        assert collapse[0].time == pytest.approx(0.1, abs=2e-3)
        assert trace.time[-1] < 0.1

    def test_raise_on_collapse(self, weak_link):
        config = SimConfig(t_end=0.5, dt=1e-3, raise_on_collapse=True, trip_enabled=False)
        with pytest.raises(SimulationCollapse) as info:
            simulate(weak_link.model(), config, [self.step])
        assert info.value.time == pytest.approx(0.1, abs=2e-3)


class TestEvents:
    def test_shed_without_bus_scales_every_load(self, toy_model):
        inputs = toy_model.default_inputs()
        before = {bus: load.p0 for bus, load in inputs.bus_loads.items() if load is not None}
        apply_event(toy_model, inputs, Event(time=1.0, kind=EventKind.SHED, fraction=0.1), 1.0)
        for bus, p0 in before.items():
            assert inputs.bus_loads[bus].p0 == pytest.approx(0.9 * p0)

    def test_load_step_on_unknown_bus(self, toy_model):
        inputs = toy_model.default_inputs()
        with pytest.raises(ConfigurationError):
            apply_event(toy_model, inputs, Event(time=0.0, kind=EventKind.LOAD_STEP, bus="99", dp=0.1), 0.0)

    def test_limiter_needs_full_fidelity(self, toy_model):
        inputs = toy_model.default_inputs()
        with pytest.raises(ConfigurationError):
            apply_event(toy_model, inputs, Event(time=0.0, kind=EventKind.ENABLE_CURRENT_LIMITER), 0.0)

    def test_adaptive_limiter_follows_capacity(self, toy_scenario):
        model = toy_scenario.model(Fidelity.FULL.value)
        inputs = model.default_inputs()
        apply_event(model, inputs, Event(time=1.0, kind=EventKind.ENABLE_CURRENT_LIMITER, inverter="G1"), 1.0)
        assert inputs.limiters[0].adaptive
        assert inputs.limiters[0].i_max == pytest.approx(0.075)
        apply_event(model, inputs, Event(time=2.0, kind=EventKind.SET_CAPACITY, inverter="G1", s_ref=0.05), 2.0)
        assert inputs.limiters[0].i_max == pytest.approx(0.05)
        assert inputs.limiters[1] is None

    @pytest.mark.parametrize("kwargs", [
        {"time": -1.0, "kind": EventKind.ENABLE_POWER_REG},
        {"time": 0.0, "kind": EventKind.LOAD_STEP},
        {"time": 0.0, "kind": EventKind.SET_CAPACITY},
        {"time": 0.0, "kind": EventKind.SHED, "fraction": 0.0},
        {"time": 0.0, "kind": EventKind.ENABLE_CURRENT_LIMITER, "i_max": -1.0},
    ])
    def test_invalid_events(self, kwargs):
        with pytest.raises(ConfigurationError):
            Event(**kwargs)

    def test_sort_is_stable_and_bounded(self):
        a = Event(time=1.0, kind=EventKind.ENABLE_POWER_REG, note="a")
        b = Event(time=0.5, kind=EventKind.ENABLE_VF_REG)
        c = Event(time=1.0, kind=EventKind.SHED, fraction=0.1, note="c")
        assert sort_events([a, b, c], 2.0) == [b, a, c]
        with pytest.raises(ConfigurationError):
            sort_events([a], 0.5)

    def test_event_dict_form(self):
        event = Event(time=0.5, kind=EventKind.SET_CAPACITY, inverter="G1", s_ref=0.06)
        assert Event.from_dict(event.to_dict()) == event
        assert event.to_dict()["kind"] == "set_capacity"


def test_limiter_threshold_ramp():
    setting = LimiterSetting(i_max=1.0, t_start=2.0, ramp_s=1.0)
    assert setting.threshold(2.0) == pytest.approx(2.0)
    assert setting.threshold(2.5) == pytest.approx(1.5)
    assert setting.threshold(3.5) == pytest.approx(1.0)
    assert LimiterSetting(i_max=0.8).threshold(0.0) == pytest.approx(0.8)


class TestShedExecutor:
    def test_sheds_once_per_interval(self):
        policy, status = ShedPolicy(increment=0.01, interval=0.5), ShedStatus()
        fired = [t for t in np.arange(0.0, 2.0, 0.1)
                 if (e := shed_policy_executor(True, policy, float(t), status)) is not None
                 and e.kind is EventKind.SHED]
        assert fired == pytest.approx([0.0, 0.5, 1.0, 1.5])
        assert status.remaining == pytest.approx(0.96)

    def test_increments_are_equal_shares_of_the_base_load(self):
        policy, status = ShedPolicy(increment=0.01, interval=0.5, use_request=False), ShedStatus()
        base, connected, fractions = 2.0, 2.0, []
        for t in np.arange(0.0, 5.0, 0.5):
            event = shed_policy_executor(True, policy, float(t), status, total_load=connected)
            fractions.append(event.fraction)
            connected *= 1.0 - event.fraction
        # each fraction is taken of the load still connected, yet the removed amounts stay equal
        assert connected == pytest.approx(base * (1.0 - 10 * 0.01))
        assert fractions[-1] > fractions[0]
        assert status.base_load == pytest.approx(base)
        assert status.shed_fraction == pytest.approx(0.10)

    def test_first_increment_covers_the_request(self):
        policy, status = ShedPolicy(increment=0.01, interval=0.5), ShedStatus()
        first = shed_policy_executor(True, policy, 0.0, status, total_load=0.5, requested=0.03)
        second = shed_policy_executor(True, policy, 0.5, status, total_load=0.47, requested=0.03)
        assert first.fraction == pytest.approx(0.03 / 0.5)
        assert second.fraction == pytest.approx(0.005 / 0.47)
        assert status.shed_amount == pytest.approx(0.035)

    def test_request_ignored_when_disabled(self):
        policy, status = ShedPolicy(increment=0.01, use_request=False), ShedStatus()
        event = shed_policy_executor(True, policy, 0.0, status, total_load=0.5, requested=0.03)
        assert event.fraction == pytest.approx(0.01)

    def test_idle_without_request(self):
        assert shed_policy_executor(False, ShedPolicy(), 0.0, ShedStatus()) is None

    def test_floor_reported_once(self):
        policy = ShedPolicy(increment=0.2, interval=0.1, floor=0.7)
        status = ShedStatus()
        kinds = [getattr(shed_policy_executor(True, policy, 0.1 * k, status), "kind", None) for k in range(4)]
        assert kinds == [EventKind.SHED, EventKind.SHED_FLOOR, None, None]

    def test_floor_can_raise(self):
        policy = ShedPolicy(increment=0.5, floor=0.6, raise_on_floor=True)
        with pytest.raises(ShedFloorReached):
            shed_policy_executor(True, policy, 0.0, ShedStatus())

    @pytest.mark.parametrize("kwargs", [{"increment": 0.0}, {"interval": 0.0}, {"floor": 1.0}])
    def test_invalid_policy(self, kwargs):
        with pytest.raises(ConfigurationError):
            ShedPolicy(**kwargs)


@pytest.fixture
def droopy_feeder():
    """One stiff-droop inverter feeding a load beyond its droop setpoint."""
    return parse_scenario({
        "name": "droopy_feeder",
        "network": {
            "buses": [{"id": "1"}, {"id": "2"}],
            "branches": [{"from_bus": "1", "to_bus": "2", "r": 0.0, "x": 0.01}],
        },
        "loads": [{"bus": "2", "p": 0.515, "q": 0.206}],
        "inverters": [{"id": "G1", "bus": "1", "droop": (0.5, 0.5), "p0": 0.48, "q0": 0.0,
                       "s_ref": 1.0, "r_c": 0.0, "l_c": 0.05}],
        "engine": {"kind": "simulate", "t_end": 2.0},
    })


def test_shedding_stops_once_frequency_is_back_in_band(droopy_feeder):
    model = droopy_feeder.model(Fidelity.REDUCED.value)
    initial = initialize(model)
    assert initial.equilibrium.f == pytest.approx(0.9825, abs=1e-3)
    trace = simulate(model, _config(2.0), [Event(time=0.1, kind=EventKind.ENABLE_VF_REG)], initial)
    assert trace.completed
    sheds = trace.events_of(EventKind.SHED)
    assert 1 <= len(sheds) <= 4
    assert sheds[0].time == pytest.approx(0.1)
    assert abs(1.0 - _final(trace, "G1", "f")) <= 0.01


def test_dt_halving_converges(toy_model):
    step = [Event(time=0.1, kind=EventKind.LOAD_STEP, bus="2", dp=0.01, dq=0.005)]
    coarse = simulate(toy_model, _config(1.0, dt=1e-3), step)
    fine = simulate(toy_model, _config(1.0, dt=5e-4), step)
    columns = [inverter_column(i, n) for i in ("G1", "G2", "G3") for n in ("p", "q", "w_ref", "v")]
    assert len(coarse.data) == len(fine.data)
    np.testing.assert_allclose(fine.data[columns].iloc[-1], coarse.data[columns].iloc[-1], atol=1e-6)


class TestSteadyState:
    @staticmethod
    def frame(values, dt=0.1):
        return pd.DataFrame({"time": np.arange(len(values)) * dt, "invG1_f": values})

    def test_settling_time(self):
        values = np.concatenate((np.linspace(0.99, 1.0, 10), np.full(30, 1.0)))
        assert detect_steady_state(self.frame(values), window=1.0) == pytest.approx(0.9)

    def test_never_settles(self):
        values = np.sin(np.arange(40))
        assert detect_steady_state(self.frame(values), window=0.5) is None

    def test_settled_span_too_short(self):
        values = np.concatenate((np.linspace(0.9, 1.0, 35), np.full(5, 1.0)))
        assert detect_steady_state(self.frame(values), window=1.0) is None

    def test_empty_trace(self):
        assert detect_steady_state(self.frame(np.zeros(0)), window=1.0) is None


def test_trace_helpers():
    data = pd.DataFrame({
        "time": [0.0, 0.1, 0.2],
        inverter_column("G1", "s_m"): [0.1, 0.2, 0.3],
        inverter_column("G1", "w_ref"): [1.0, 0.995, 0.998],
        inverter_column("G1", "v"): [1.0, 0.97, 1.01],
    })
    trace = SimTrace(data)
    assert trace.inverter_ids == ["G1"]
    assert trace.at(0.14)["time"] == pytest.approx(0.1)
    assert len(trace.window(0.05, 0.2)) == 2
    summary = deviation_summary(trace, 0.0, 0.2)
    assert summary["max_df"] == pytest.approx(0.005)
    assert summary["max_dv"] == pytest.approx(0.03)


def test_limiter_comparison_needs_full_fidelity(toy_model):
    with pytest.raises(ConfigurationError):
        compare_limiter(toy_model, _config(0.1), [], [])
