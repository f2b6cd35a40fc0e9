"""
Unit-suffixed quantities ("1.2 MVA", "200 kW", "5e-5 H") converted to per unit.

Bare numbers are taken to be per unit already.
"""
import re
from typing import Union

from src.grid.network import PerUnitBase
from src.inverter.params import capacitance_to_pu, inductance_to_pu
from src.utils.errors import ConfigurationError

Quantity = Union[float, int, str]

_PATTERN = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")

# unit -> (dimension, scale to SI)
UNITS = {
    "pu": ("any", 1.0),
    "VA": ("power", 1.0), "kVA": ("power", 1e3), "MVA": ("power", 1e6),
    "W": ("power", 1.0), "kW": ("power", 1e3), "MW": ("power", 1e6),
    "Var": ("power", 1.0), "kVar": ("power", 1e3), "MVar": ("power", 1e6),
    "V": ("voltage", 1.0), "kV": ("voltage", 1e3),
    "Hz": ("frequency", 1.0),
    "H": ("inductance", 1.0), "mH": ("inductance", 1e-3), "uH": ("inductance", 1e-6),
    "F": ("capacitance", 1.0), "mF": ("capacitance", 1e-3), "uF": ("capacitance", 1e-6),
    "ohm": ("impedance", 1.0), "Ohm": ("impedance", 1.0),
    "s": ("time", 1.0), "ms": ("time", 1e-3),
}
DIMENSIONS = {"power", "voltage", "frequency", "inductance", "capacitance", "impedance", "time"}


def split_quantity(value: Quantity):
    """(number, unit) with unit '' for bare numbers."""
    if isinstance(value, bool):
        raise ConfigurationError(f"Not a quantity: {value!r}")
    if isinstance(value, (int, float)):
        return float(value), ""
    match = _PATTERN.match(str(value))
    if not match:
        raise ConfigurationError(f"Cannot parse quantity {value!r}")
    number, unit = match.groups()
    if unit and unit not in UNITS:
        raise ConfigurationError(f"Unknown unit {unit!r} in {value!r}")
    return float(number), unit


def check_quantity(value: Quantity, dimension: str) -> Quantity:
    """Syntax and dimension check only; used by the schema validators."""
    _, unit = split_quantity(value)
    if unit and UNITS[unit][0] not in (dimension, "any"):
        raise ConfigurationError(f"{value!r} is not a {dimension} quantity")
    return value


def to_per_unit(value: Quantity, dimension: str, base: PerUnitBase, level: int = 0) -> float:
    """Convert a quantity to per unit on ``base`` (time is returned in seconds)."""
    if dimension not in DIMENSIONS:
        raise ConfigurationError(f"Unknown dimension {dimension!r}")
    number, unit = split_quantity(check_quantity(value, dimension))
    if not unit or unit == "pu":
        return number
    si = number * UNITS[unit][1]
    if dimension == "power":
        return si / base.s_base
    if dimension == "voltage":
        return si / base.v_base[level]
    if dimension == "frequency":
        return si / base.f_base
    if dimension == "inductance":
        return inductance_to_pu(si, base, level)
    if dimension == "capacitance":
        return capacitance_to_pu(si, base, level)
    if dimension == "impedance":
        return si / base.z_base(level)
    return si
