"""
Supplementary regulators: capacity-tracking power regulator and deadband V-f regulator.
"""
from src.regulators.power_regulator import (
    PowerRegulatorParams,
    capacity_error,
    power_regulator_step,
    allocation_from_power_factor,
    allocation_gains,
    ramp_factor,
)
from src.regulators.vf_regulator import (
    Action,
    VfRegulatorParams,
    RegulatorState,
    SupplementarySignals,
    VfRegulatorOutput,
    deadband,
    deadband_f,
    deadband_v,
    trigger_logic,
    vf_regulator_step,
    clamp_supplementary,
    validate_priority,
)

__all__ = [
    'PowerRegulatorParams',
    'capacity_error',
    'power_regulator_step',
    'allocation_from_power_factor',
    'allocation_gains',
    'ramp_factor',
    'Action',
    'VfRegulatorParams',
    'RegulatorState',
    'SupplementarySignals',
    'VfRegulatorOutput',
    'deadband',
    'deadband_f',
    'deadband_v',
    'trigger_logic',
    'vf_regulator_step',
    'clamp_supplementary',
    'validate_priority',
]
