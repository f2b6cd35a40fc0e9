"""
Grid-forming inverter model: parameters, cascaded control and full dynamics.
"""
from src.inverter.params import (
    STATE_NAMES,
    InverterParams,
    InverterState,
    PrimarySignals,
    inductance_to_pu,
    capacitance_to_pu,
)
from src.inverter.control import (
    droop_primary,
    voltage_regulator_step,
    current_regulator_step,
    filter_and_measure,
    current_limiter_baseline,
)
from src.inverter.dynamics import (
    GridInterface,
    InverterOutputs,
    inverter_derivatives,
    steady_state_from_power,
    to_common,
    to_local,
)

__all__ = [
    'STATE_NAMES',
    'InverterParams',
    'InverterState',
    'PrimarySignals',
    'inductance_to_pu',
    'capacitance_to_pu',
    'droop_primary',
    'voltage_regulator_step',
    'current_regulator_step',
    'filter_and_measure',
    'current_limiter_baseline',
    'GridInterface',
    'InverterOutputs',
    'inverter_derivatives',
    'steady_state_from_power',
    'to_common',
    'to_local',
]
