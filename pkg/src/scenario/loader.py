"""
Scenario files to domain objects and back.

Parsing normalizes every quantity to per unit; the normalized schema is kept on the
Scenario so that dumping and re-parsing reproduces the same model.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from loguru import logger
from pydantic import ValidationError

from src.equilibrium.problem import EquilibriumProblem
from src.grid.network import Branch, Bus, NetworkModel, PerUnitBase
from src.grid.zip_load import ZipLoadParams
from src.inverter.params import InverterParams
from src.regulators.power_regulator import PowerRegulatorParams
from src.regulators.vf_regulator import VfRegulatorParams, validate_priority
from src.scenario.models import EventSpec, InverterSpec, LoadSpec, ScenarioFile
from src.scenario.units import UNITS, split_quantity, to_per_unit
from src.tds.engine import SimConfig
from src.tds.events import Event, EventKind
from src.tds.model import Fidelity, InverterUnit, MicrogridModel
from src.tds.shedding import ShedPolicy
from src.utils.errors import ConfigurationError


@dataclass
class Scenario:
    name: str
    spec: ScenarioFile
    network: NetworkModel
    inverters: List[InverterUnit]
    events: List[Event] = field(default_factory=list)
    description: str = ""

    @property
    def engine(self):
        return self.spec.engine

    def model(self, fidelity: Optional[str] = None) -> MicrogridModel:
        return MicrogridModel(self.network, self.inverters, Fidelity(fidelity or self.spec.engine.fidelity))

    def sim_config(
        self,
        dt: Optional[float] = None,
        fidelity: Optional[str] = None,
        output_rate_hz: Optional[float] = None,
    ) -> SimConfig:
        engine = self.spec.engine
        return SimConfig(
            t_end=engine.t_end,
            dt=dt if dt is not None else engine.dt,
            fidelity=Fidelity(fidelity or engine.fidelity),
            output_rate_hz=output_rate_hz or self.spec.output.output_rate_hz,
            shed_policy=ShedPolicy(engine.shed_increment, engine.shed_interval, engine.shed_floor),
            trip_enabled=engine.trip_enabled,
        )

    def equilibrium_problem(self) -> EquilibriumProblem:
        return EquilibriumProblem(network=self.network, inverters=tuple(u.droop_unit() for u in self.inverters))

    def summary(self) -> Dict[str, Any]:
        p_load, q_load = self.equilibrium_problem().load_table().total_base()
        return {
            "name": self.name,
            "buses": self.network.n_bus,
            "branches": len(self.network.branches),
            "inverters": [u.id for u in self.inverters],
            "total_load_pu": [round(p_load, 6), round(q_load, 6)],
            "total_capacity_pu": round(sum(u.power_reg.s_ref for u in self.inverters), 6),
            "events": len(self.events),
            "engine": self.spec.engine.kind.value,
        }


def _si(value, default_unit: str) -> float:
    number, unit = split_quantity(value)
    return number * UNITS[unit or default_unit][1]


def _base(spec: ScenarioFile) -> PerUnitBase:
    return PerUnitBase(
        s_base=_si(spec.base.s_base, "MVA"),
        v_base=tuple(_si(v, "kV") for v in spec.base.v_base),
        f_base=_si(spec.base.f_base, "Hz"),
    )


def normalize(spec: ScenarioFile) -> ScenarioFile:
    """Copy of ``spec`` with every quantity converted to per unit."""
    base = _base(spec)
    levels = {b.id: b.voltage_level for b in spec.network.buses}
    for level in set(levels.values()):
        if level >= len(base.v_base):
            raise ConfigurationError(f"Voltage level {level} has no base voltage")

    def pu(value, dimension, level=0):
        return to_per_unit(value, dimension, base, level)

    branches = [
        b if b.r is None else b.model_copy(update={"r": pu(b.r, "impedance", levels[b.from_bus]),
                                                   "x": pu(b.x, "impedance", levels[b.from_bus])})
        for b in spec.network.branches
    ]
    loads = [load.model_copy(update={"p": pu(load.p, "power"), "q": pu(load.q, "power")})
             for load in spec.loads]
    inverters = []
    for inv in spec.inverters:
        level = levels[inv.bus]
        inverters.append(inv.model_copy(update={
            "l_f": pu(inv.l_f, "inductance", level),
            "c_f": pu(inv.c_f, "capacitance", level),
            "r_f": pu(inv.r_f, "impedance", level),
            "r_c": pu(inv.r_c, "impedance", level),
            "l_c": pu(inv.l_c, "inductance", level),
            "s_ref": pu(inv.s_ref, "power"),
            "p0": pu(inv.p0, "power"),
            "q0": pu(inv.q0, "power"),
        }))
    events = [
        e.model_copy(update={"dp": pu(e.dp, "power"), "dq": pu(e.dq, "power"),
                             "s_ref": None if e.s_ref is None else pu(e.s_ref, "power")})
        for e in spec.events
    ]
    network = spec.network.model_copy(update={"branches": branches})
    return spec.model_copy(update={"network": network, "loads": loads, "inverters": inverters, "events": events})


def _zip_load(load: LoadSpec) -> ZipLoadParams:
    p1, p2, p3 = load.p_composition
    q1, q2, q3 = load.q_composition
    return ZipLoadParams(p0=float(load.p), q0=float(load.q), p1=p1, p2=p2, p3=p3,
                         q1=q1, q2=q2, q3=q3, k_pf=load.k_pf, k_qf=load.k_qf)


def _inverter(inv: InverterSpec) -> InverterUnit:
    kp_i, ki_i = inv.current_gains
    kp_v, ki_v = inv.voltage_gains
    k_df, k_dv = inv.droop
    kp_s, ki_s, k_w, k_v = inv.power_regulator
    kp_f, ki_f, kp_vv, ki_vv = inv.vf_regulator
    params = InverterParams(
        l_f=float(inv.l_f), c_f=float(inv.c_f), r_f=float(inv.r_f),
        kp_i=kp_i, ki_i=ki_i, kp_v=kp_v, ki_v=ki_v, k_df=k_df, k_dv=k_dv,
        p0=float(inv.p0), q0=float(inv.q0), s_rated=float(inv.s_ref),
        pm_filter_cutoff=inv.pm_filter_cutoff, r_c=float(inv.r_c), l_c=float(inv.l_c),
    )
    power = PowerRegulatorParams(kp_s=kp_s, ki_s=ki_s, k_w=k_w, k_v=k_v, s_ref=float(inv.s_ref),
                                 enabled=inv.power_regulator_enabled)
    vf = VfRegulatorParams(kp_f=kp_f, ki_f=ki_f, kp_v=kp_vv, ki_v=ki_vv, enabled=inv.vf_regulator_enabled)
    validate_priority(power, vf, inv.id)
    return InverterUnit(id=inv.id, bus_id=inv.bus, params=params, power_reg=power, vf_reg=vf)


def _event(event: EventSpec) -> Event:
    return Event(
        time=event.time, kind=EventKind(event.kind), bus=event.bus, inverter=event.inverter,
        dp=float(event.dp), dq=float(event.dq),
        s_ref=None if event.s_ref is None else float(event.s_ref),
        fraction=event.fraction, i_max=event.i_max, priority=event.priority,
        ramp_s=event.ramp_s, note=event.note,
    )


def build_scenario(spec: ScenarioFile) -> Scenario:
    spec = normalize(spec)
    base = _base(spec)
    loads = {load.bus: _zip_load(load) for load in spec.loads}
    hosts = {inv.bus: inv.id for inv in spec.inverters}
    buses = [
        Bus(id=b.id, v_nominal=b.v_nominal, load=loads.get(b.id), inverter_id=hosts.get(b.id),
            g_shunt=b.g_shunt, b_shunt=b.b_shunt, voltage_level=b.voltage_level)
        for b in spec.network.buses
    ]
    branches = [
        Branch(b.from_bus, b.to_bus, b.g, b.b) if b.r is None
        else Branch.from_impedance(b.from_bus, b.to_bus, float(b.r), float(b.x))
        for b in spec.network.branches
    ]
    network = NetworkModel.build(buses, branches, base)
    inverters = [_inverter(inv) for inv in spec.inverters]
    events = [_event(e) for e in spec.events]
    logger.debug(f"Scenario '{spec.name}': {len(buses)} buses, {len(inverters)} inverters, {len(events)} events")
    return Scenario(spec.name, spec, network, inverters, events, spec.description)


def parse_scenario(data: Dict[str, Any]) -> Scenario:
    """Validate a scenario mapping; pydantic's ValidationError propagates for field diagnostics."""
    return build_scenario(ScenarioFile.model_validate(data))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Read, validate and build a scenario file.

    Args:
        path: JSON scenario file.

    Returns:
        The scenario with quantities normalized to per unit.

    Raises:
        ConfigurationError: If the file cannot be read or is not valid JSON.
        ValidationError: If a field fails the schema.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return parse_scenario(data)
    except (ValidationError, ConfigurationError) as exc:
        logger.error(f"Error loading scenario {path}: {exc}")
        raise


def dump_scenario(scenario: Scenario) -> Dict[str, Any]:
    return scenario.spec.model_dump(mode="json")


def format_validation_error(exc: ValidationError) -> List[str]:
    """One line per failing field: dotted location and message."""
    lines = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{location}: {error['msg']}")
    return lines
