"""
Pydantic schema of a scenario file.

Quantities may carry unit suffixes ("1.2 MVA", "200 kW", "5e-5 H"); bare numbers are
per unit. Only syntax and dimensions are checked here; conversion happens in the loader.
"""
from enum import Enum
from typing import Annotated, List, Optional, Tuple, Union

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, field_validator, model_validator

from src.scenario.units import check_quantity
from src.tds.events import SCHEDULABLE

Quantity = Union[float, str]


def _quantity(dimension: str):
    def validate(value):
        try:
            return check_quantity(value, dimension)
        except Exception as exc:
            raise ValueError(str(exc)) from exc
    return validate


Power = Annotated[Quantity, AfterValidator(_quantity("power"))]
Frequency = Annotated[Quantity, AfterValidator(_quantity("frequency"))]
Voltage = Annotated[Quantity, AfterValidator(_quantity("voltage"))]
Impedance = Annotated[Quantity, AfterValidator(_quantity("impedance"))]
Inductance = Annotated[Quantity, AfterValidator(_quantity("inductance"))]
Capacitance = Annotated[Quantity, AfterValidator(_quantity("capacitance"))]


class EngineKind(str, Enum):
    SIMULATE = "simulate"
    EQUILIBRIUM = "equilibrium"
    FEASIBILITY = "feasibility"
    EIGEN = "eigen"


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BaseSection(Strict):
    """Per-unit bases."""
    s_base: Power = "10 MVA"
    f_base: Frequency = "60 Hz"
    v_base: List[Voltage] = Field(default_factory=lambda: ["12.47 kV"], min_length=1)


class BusSpec(Strict):
    id: str
    v_nominal: float = 1.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    voltage_level: int = 0


class BranchSpec(Strict):
    """Series branch given as impedance (r, x) or as p.u. admittance (g, b)."""
    from_bus: str
    to_bus: str
    r: Optional[Impedance] = None
    x: Optional[Impedance] = None
    g: Optional[float] = None
    b: Optional[float] = None

    @model_validator(mode="after")
    def check_form(self):
        has_z = (self.r, self.x) != (None, None)
        has_y = (self.g, self.b) != (None, None)
        pair = (self.r, self.x) if has_z else (self.g, self.b)
        if has_z == has_y or None in pair:
            raise ValueError("give either r and x or g and b")
        return self


class NetworkSection(Strict):
    buses: List[BusSpec] = Field(..., min_length=1)
    branches: List[BranchSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_references(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Duplicate bus ids: {sorted({i for i in ids if ids.count(i) > 1})}")
        for k, branch in enumerate(self.branches):
            for end in (branch.from_bus, branch.to_bus):
                if end not in ids:
                    raise ValueError(f"branches[{k}] references unknown bus {end!r}")
        return self


class LoadSpec(Strict):
    """ZIP load; compositions are [constant-Z, constant-I, constant-P] fractions."""
    bus: str
    name: Optional[str] = None
    p: Power
    q: Power
    p_composition: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    q_composition: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    k_pf: float = 0.0
    k_qf: float = 0.0


class InverterSpec(Strict):
    """One grid-forming inverter; gain pairs follow the parameter table layout."""
    id: str
    bus: str
    l_f: Inductance = 0.05
    c_f: Capacitance = 0.05
    r_f: Impedance = 0.005
    current_gains: Tuple[float, float] = (2.0, 2.0)
    voltage_gains: Tuple[float, float] = (1.0, 1.0)
    droop: Tuple[float, float] = (0.01, 0.05)
    power_regulator: Tuple[float, float, float, float] = (1.0, 16.0, 0.004, 0.008)
    vf_regulator: Tuple[float, float, float, float] = (0.05, 1.0, 0.05, 1.0)
    s_ref: Power = 1.0
    p0: Power = 0.0
    q0: Power = 0.0
    r_c: Impedance = 0.005
    l_c: Inductance = 0.05
    pm_filter_cutoff: float = 31.4
    power_regulator_enabled: bool = False
    vf_regulator_enabled: bool = False


class EventSpec(Strict):
    time: float = Field(..., ge=0)
    kind: str
    bus: Optional[str] = None
    inverter: Optional[str] = None
    dp: Power = 0.0
    dq: Power = 0.0
    s_ref: Optional[Power] = None
    fraction: float = 0.0
    i_max: Optional[float] = None
    priority: bool = True
    ramp_s: float = 0.0
    note: str = ""

    @field_validator("kind")
    @classmethod
    def check_kind(cls, value):
        allowed = sorted(kind.value for kind in SCHEDULABLE)
        if value not in allowed:
            raise ValueError(f"kind must be one of {allowed}")
        return value


class EngineSection(Strict):
    kind: EngineKind = EngineKind.SIMULATE
    t_end: float = Field(20.0, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    fidelity: str = "reduced"
    load_factors: List[float] = Field(default_factory=lambda: [1.0])
    n_angles: int = 121
    window: float = 0.2
    full_grid: bool = False
    condition: int = Field(1, ge=1, le=3)
    grid: Optional[List[float]] = None
    trip_enabled: bool = True
    shed_increment: float = 0.01
    shed_interval: float = 0.5
    shed_floor: float = 0.5

    @field_validator("fidelity")
    @classmethod
    def check_fidelity(cls, value):
        if value not in ("full", "reduced"):
            raise ValueError("fidelity must be 'full' or 'reduced'")
        return value


class OutputSection(Strict):
    dir: Optional[str] = None
    output_rate_hz: float = Field(1000.0, gt=0)


class ScenarioFile(Strict):
    name: str
    description: str = ""
    base: BaseSection = Field(default_factory=BaseSection)
    network: NetworkSection
    loads: List[LoadSpec] = Field(default_factory=list)
    inverters: List[InverterSpec] = Field(..., min_length=1)
    events: List[EventSpec] = Field(default_factory=list)
    engine: EngineSection = Field(default_factory=EngineSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def check_references(self):
        bus_ids = {b.id for b in self.network.buses}
        inv_ids = [i.id for i in self.inverters]
        if len(set(inv_ids)) != len(inv_ids):
            raise ValueError("Duplicate inverter ids")
        load_buses = [load.bus for load in self.loads]
        if len(set(load_buses)) != len(load_buses):
            raise ValueError("At most one load per bus")
        for k, load in enumerate(self.loads):
            if load.bus not in bus_ids:
                raise ValueError(f"loads[{k}] references unknown bus {load.bus!r}")
        for k, inv in enumerate(self.inverters):
            if inv.bus not in bus_ids:
                raise ValueError(f"inverters[{k}] references unknown bus {inv.bus!r}")
        for k, event in enumerate(self.events):
            if event.bus is not None and event.bus not in bus_ids:
                raise ValueError(f"events[{k}] references unknown bus {event.bus!r}")
            if event.inverter is not None and event.inverter not in inv_ids:
                raise ValueError(f"events[{k}] references unknown inverter {event.inverter!r}")
            if event.time > self.engine.t_end:
                raise ValueError(f"events[{k}] at t={event.time} lies beyond t_end={self.engine.t_end}")
        return self
