"""
Fixed-step time-domain engine.

Each RK4 stage re-solves the algebraic network for the stage's differential state.
Scheduled events land on step boundaries; the trace is decimated to the output rate.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from config.settings import settings
from src.equilibrium.problem import EquilibriumSolution
from src.equilibrium.solver import solve_droop_equilibrium
from src.grid.zip_load import ZipLoadParams
from src.tds.events import Event, EventKind, sort_events
from src.tds.model import Fidelity, LimiterSetting, MicrogridModel, RuntimeInputs, Snapshot
from src.tds.shedding import ShedPolicy, ShedStatus, shed_policy_executor
from src.tds.trace import SimTrace, TraceRecorder, bus_column, inverter_column
from src.utils.errors import ConfigurationError, SimulationCollapse

TRIP_FACTOR = 1.5
TRIP_DELAY = 0.2


@dataclass
class SimConfig:
    t_end: float
    dt: Optional[float] = None
    fidelity: Fidelity = Fidelity.REDUCED
    steady_state_tol: float = field(default_factory=lambda: settings.steady_state_tol)
    network_tol: Optional[float] = None
    output_rate_hz: float = field(default_factory=lambda: settings.output_rate_hz)
    shed_policy: Optional[ShedPolicy] = field(default_factory=ShedPolicy)
    trip_enabled: bool = True
    raise_on_collapse: bool = False

    def __post_init__(self):
        self.fidelity = Fidelity(self.fidelity)
        if self.t_end <= 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.output_rate_hz <= 0:
            raise ConfigurationError("output_rate_hz must be positive")

    @property
    def step(self) -> float:
        if self.dt is not None:
            return self.dt
        return settings.dt_full if self.fidelity is Fidelity.FULL else settings.dt_reduced


@dataclass
class InitialCondition:
    model: MicrogridModel
    x: np.ndarray
    y: np.ndarray
    inputs: RuntimeInputs
    equilibrium: EquilibriumSolution
    derivative_norm: float


def _prepare_model(model: MicrogridModel, config: Optional[SimConfig]) -> MicrogridModel:
    """The model the run uses; the caller's model is never modified."""
    if config is None:
        return model
    if config.fidelity is not model.fidelity:
        model = model.with_fidelity(config.fidelity)
    if config.network_tol is not None and config.network_tol != model.network_tol:
        model = model.with_network_tol(config.network_tol)
    return model


def initialize(
    model: MicrogridModel,
    config: Optional[SimConfig] = None,
    inputs: Optional[RuntimeInputs] = None,
    guess: Optional[EquilibriumSolution] = None,
) -> InitialCondition:
    """
    Start every state at the droop equilibrium of the initial configuration.

    Args:
        model: Model to initialize; a config with another fidelity or network
            tolerance yields a new model, the caller's is left as it is.
        config: Run settings; only fidelity, network tolerance and the
            steady-state tolerance are read.
        inputs: Runtime inputs to start from, copied. Defaults to the model's.
        guess: Warm start for the equilibrium solve.

    Returns:
        The initial condition, including the model the run must use.

    Raises:
        NonConvergence: If the equilibrium solve fails.
    """
    model = _prepare_model(model, config)
    inputs = inputs.copy() if inputs is not None else model.default_inputs()
    model.refresh_loads(inputs)
    solution = solve_droop_equilibrium(model.equilibrium_problem(inputs), initial=guess)
    x0, y0 = model.initial_state(solution, inputs)
    dx, snap = model.evaluate(x0, y0, 0.0, inputs, solve=True)
    norm = float(np.max(np.abs(dx))) if dx.size else 0.0
    tol = config.steady_state_tol if config is not None else settings.steady_state_tol
    if norm > tol:
        logger.warning(f"Initial derivative norm {norm:.3e} exceeds steady-state tolerance {tol:.1e}")
    else:
        logger.debug(f"Initialized at equilibrium f={solution.f:.6f}, derivative norm {norm:.2e}")
    return InitialCondition(model, x0, snap.y, inputs, solution, norm)


def apply_event(model: MicrogridModel, inputs: RuntimeInputs, event: Event, t: float):
    """
    Mutate the runtime inputs for one event.

    Args:
        model: The model being integrated; only read.
        inputs: Runtime inputs updated in place.
        event: The event to apply; events without an inverter address every inverter.
        t: Time the event takes effect (s), used for enable ramps and limiter ramps.

    Raises:
        ConfigurationError: For an unknown bus, a limiter on a reduced model or a
            kind that cannot be scheduled.
    """
    targets = (range(model.n_inverter) if event.inverter is None
               else [model.inverter_index(event.inverter)])
    kind = event.kind

    if kind is EventKind.LOAD_STEP:
        if event.bus not in inputs.bus_loads:
            raise ConfigurationError(f"Load step on unknown bus {event.bus}")
        load = inputs.bus_loads[event.bus]
        if load is None:
            load = ZipLoadParams(p0=0.0, q0=0.0)
        inputs.bus_loads[event.bus] = load.stepped(event.dp, event.dq)
        model.refresh_loads(inputs)
    elif kind is EventKind.SHED:
        buses = list(inputs.bus_loads) if event.bus is None else [event.bus]
        for bus in buses:
            if inputs.bus_loads.get(bus) is not None:
                inputs.bus_loads[bus] = inputs.bus_loads[bus].scaled(1.0 - event.fraction)
        model.refresh_loads(inputs)
    elif kind is EventKind.SET_CAPACITY:
        for k in targets:
            inputs.power_regs[k] = replace(inputs.power_regs[k], s_ref=event.s_ref)
            lim = inputs.limiters[k]
            if lim is not None and lim.adaptive:
                inputs.limiters[k] = replace(lim, i_max=event.s_ref / model.inverters[k].params.v0)
    elif kind is EventKind.ENABLE_POWER_REG:
        for k in targets:
            inputs.power_regs[k] = replace(inputs.power_regs[k], enabled=True)
            inputs.power_enabled_at[k] = t
    elif kind is EventKind.ENABLE_VF_REG:
        for k in targets:
            inputs.vf_regs[k] = replace(inputs.vf_regs[k], enabled=True)
            inputs.vf_enabled_at[k] = t
    elif kind is EventKind.ENABLE_CURRENT_LIMITER:
        if model.fidelity is not Fidelity.FULL:
            raise ConfigurationError("Current limiters need FULL fidelity")
        for k in targets:
            i_max = event.i_max
            if i_max is None:
                i_max = inputs.power_regs[k].s_ref / model.inverters[k].params.v0
            inputs.limiters[k] = LimiterSetting(i_max, event.priority, t, event.ramp_s,
                                                adaptive=event.i_max is None)
    else:
        raise ConfigurationError(f"Event kind {kind.value} cannot be applied")
    logger.info(f"t={t:.4f}s: applied {kind.value}" + (f" ({event.note})" if event.note else ""))


def _row(model: MicrogridModel, x: np.ndarray, snap: Snapshot, t: float, inputs: RuntimeInputs) -> Dict[str, float]:
    row: Dict[str, float] = {"time": t}
    for k, unit in enumerate(model.inverters):
        xk = x[model.block(k)]
        s_m, f_m, _ = model.measurements(xk)
        supp = snap.supplementary[k]
        node = model.net.inverter_node[k]
        values = {
            "p": snap.p[k], "q": snap.q[k], "s": float(np.hypot(snap.p[k], snap.q[k])),
            "s_m": s_m, "s_ref": inputs.power_regs[k].s_ref, "v": snap.v[node], "f": f_m, "w_ref": snap.w_ref[k],
            "delta": xk[model.idx["delta"]], "e_s": supp.e_s, "e_f": supp.e_f, "e_v": supp.e_v,
            "state_f": supp.state_f, "state_v": supp.state_v,
            "dw1": supp.dw1, "dv1": supp.dv1, "dw2": supp.dw2, "dv2": supp.dv2,
        }
        for name, value in values.items():
            row[inverter_column(unit.id, name)] = float(value)
    for n, bus in enumerate(model.network.buses):
        row[bus_column(bus.id, "v")] = float(snap.v[n])
        row[bus_column(bus.id, "theta")] = float(snap.theta[n])
    row["balance_residual"] = snap.balance
    return row


def simulate(
    model: MicrogridModel,
    config: SimConfig,
    events: Sequence[Event] = (),
    initial: Optional[InitialCondition] = None,
) -> SimTrace:
    """
    Integrate from the initial condition through the scheduled events.

    A network collapse ends the run early: the partial trace is returned with
    ``completed=False`` unless ``config.raise_on_collapse`` is set.

    Args:
        model: Model to integrate, ignored when ``initial`` is given.
        config: Horizon, step, output rate, shed policy and trip settings.
        events: Scheduled events; sorted stably and clipped to the horizon.
        initial: Precomputed initial condition, reused across runs.

    Returns:
        The recorded trace with its event log.

    Raises:
        SimulationCollapse: On collapse when ``config.raise_on_collapse`` is set.
        ShedFloorReached: When the shed policy is set to raise at its floor.
    """
    initial = initial or initialize(model, config)
    model = initial.model
    inputs = initial.inputs.copy()
    x = initial.x.copy()
    y = initial.y.copy()

    dt = config.step
    n_steps = int(round(config.t_end / dt))
    decimate = max(1, int(round(1.0 / (config.output_rate_hz * dt))))
    schedule = sort_events(events, config.t_end)
    pending = list(schedule)
    log: List[Event] = []
    recorder = TraceRecorder([u.id for u in model.inverters], [b.id for b in model.network.buses])
    shed_status = ShedStatus()
    over_since: List[Optional[float]] = [None] * model.n_inverter
    request_was_active = False
    logger.info(f"Simulating {config.t_end:.2f}s at dt={dt:g}s ({model.fidelity.value}, "
                f"{len(schedule)} events)")

    step = 0
    try:
        while True:
            t = step * dt
            while pending and pending[0].time <= t + 0.5 * dt:
                event = pending.pop(0)
                apply_event(model, inputs, event, t)
                log.append(replace(event, time=t))

            k1, snap = model.evaluate(x, y, t, inputs, solve=True)
            y = snap.y

            requesting = [k for k in model.active_inverters(inputs) if snap.supplementary[k].shed_request]
            request = bool(requesting)
            if request and not request_was_active:
                log.append(Event(time=t, kind=EventKind.SHED_REQUEST))
            request_was_active = request
            if config.shed_policy is not None:
                shed = shed_policy_executor(
                    request, config.shed_policy, t, shed_status,
                    total_load=_total_load(inputs),
                    requested=sum(snap.supplementary[k].shed_magnitude for k in requesting),
                )
                if shed is not None:
                    if shed.kind is EventKind.SHED:
                        apply_event(model, inputs, shed, t)
                        k1, snap = model.evaluate(x, y, t, inputs, solve=True)
                        y = snap.y
                    log.append(shed)

            if config.trip_enabled and _check_trips(model, inputs, x, t, over_since, log):
                unknown = model.unknown_nodes(inputs)
                guess = np.concatenate((snap.v[unknown], snap.theta[unknown]))
                k1, snap = model.evaluate(x, guess, t, inputs, solve=True)
                y = snap.y

            if step % decimate == 0 or step == n_steps:
                recorder.record(_row(model, x, snap, t, inputs))
            if step == n_steps:
                break

            k2, s2 = model.evaluate(x + 0.5 * dt * k1, y, t + 0.5 * dt, inputs, solve=True)
            k3, s3 = model.evaluate(x + 0.5 * dt * k2, s2.y, t + 0.5 * dt, inputs, solve=True)
            k4, _ = model.evaluate(x + dt * k3, s3.y, t + dt, inputs, solve=True)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step += 1
    except SimulationCollapse as exc:
        t_fail = step * dt
        logger.error(f"Simulation collapsed at t={t_fail:.4f}s: {exc}")
        log.append(Event(time=t_fail, kind=EventKind.COLLAPSE, note=str(exc)))
        if config.raise_on_collapse:
            raise SimulationCollapse(str(exc), time=t_fail, last_state=x.copy()) from exc
        return recorder.build(log, model.fidelity.value, completed=False, failure=str(exc))

    logger.success(f"Simulation finished: {len(recorder.rows)} samples, {len(log)} logged events")
    return recorder.build(log, model.fidelity.value)


def _total_load(inputs: RuntimeInputs) -> float:
    """Apparent power of every connected load at its base voltage and frequency."""
    return abs(sum(complex(load.p0, load.q0) for load in inputs.bus_loads.values() if load is not None))


def _check_trips(model, inputs, x, t, over_since, log) -> bool:
    """Trip inverters overloaded past TRIP_FACTOR x s_ref for longer than TRIP_DELAY without a power regulator."""
    tripped = False
    for k in model.active_inverters(inputs):
        pr = inputs.power_regs[k]
        s_m = model.measurements(x[model.block(k)])[0]
        if pr.enabled or s_m <= TRIP_FACTOR * pr.s_ref:
            over_since[k] = None
            continue
        if over_since[k] is None:
            over_since[k] = t
        elif t - over_since[k] > TRIP_DELAY:
            unit = model.inverters[k]
            inputs.tripped[k] = True
            tripped = True
            log.append(Event(time=t, kind=EventKind.TRIP, inverter=unit.id, note=f"s_m={s_m:.4f}"))
            logger.warning(f"Inverter {unit.id} tripped at t={t:.3f}s (s_m={s_m:.4f}, s_ref={pr.s_ref:.4f})")
    if tripped and not model.active_inverters(inputs):
        raise SimulationCollapse("Every inverter has tripped", time=t)
    return tripped


def deviation_summary(trace: SimTrace, t_start: float = 0.0, t_end: Optional[float] = None,
                      f0: float = 1.0, v0: float = 1.0) -> Dict[str, float]:
    """Largest |f - f0| and |V - v0| over the inverters inside a time window."""
    data = trace.window(t_start, trace.time[-1] if t_end is None else t_end)
    f_cols = [inverter_column(i, "w_ref") for i in trace.inverter_ids]
    v_cols = [inverter_column(i, "v") for i in trace.inverter_ids]
    if data.empty:
        return {"max_df": 0.0, "max_dv": 0.0}
    return {
        "max_df": float(np.max(np.abs(data[f_cols].to_numpy() - f0))),
        "max_dv": float(np.max(np.abs(data[v_cols].to_numpy() - v0))),
    }


def compare_limiter(
    model: MicrogridModel,
    config: SimConfig,
    regulator_events: Sequence[Event],
    limiter_events: Sequence[Event],
    t_start: float = 0.0,
    t_end: Optional[float] = None,
) -> pd.DataFrame:
    """
    Run the same scenario with the power regulator and with the limiter baseline.

    Args:
        model: FULL-fidelity model shared by both runs.
        config: Run settings; must select FULL fidelity.
        regulator_events: Script enabling the power regulators.
        limiter_events: The same script with current limiters instead.
        t_start: Start of the deviation window (s).
        t_end: End of the deviation window (s); defaults to the end of each trace.

    Returns:
        One row per run with ``completed``, ``max_df`` and ``max_dv``.
    """
    if config.fidelity is not Fidelity.FULL:
        raise ConfigurationError("The limiter comparison needs FULL fidelity")
    rows = []
    initial = initialize(model, config)
    for label, events in (("power_regulator", regulator_events), ("current_limiter", limiter_events)):
        trace = simulate(initial.model, config, events, initial)
        summary = deviation_summary(trace, t_start, t_end)
        rows.append({"run": label, "completed": trace.completed, **summary})
    return pd.DataFrame(rows)
