"""
Time-domain simulation of the multi-inverter microgrid.
"""
from src.tds.events import Event, EventKind, sort_events
from src.tds.model import (
    Fidelity,
    InverterUnit,
    LimiterSetting,
    RuntimeInputs,
    BranchSelection,
    MicrogridModel,
    REDUCED_STATE_NAMES,
)
from src.tds.trace import SimTrace, TraceRecorder, INVERTER_FIELDS
from src.tds.shedding import ShedPolicy, ShedStatus, shed_policy_executor
from src.tds.steady_state import detect_steady_state
from src.tds.engine import (
    SimConfig,
    InitialCondition,
    initialize,
    apply_event,
    simulate,
    deviation_summary,
    compare_limiter,
)

__all__ = [
    'Event',
    'EventKind',
    'sort_events',
    'Fidelity',
    'InverterUnit',
    'LimiterSetting',
    'RuntimeInputs',
    'BranchSelection',
    'MicrogridModel',
    'REDUCED_STATE_NAMES',
    'SimTrace',
    'TraceRecorder',
    'INVERTER_FIELDS',
    'ShedPolicy',
    'ShedStatus',
    'shed_policy_executor',
    'detect_steady_state',
    'SimConfig',
    'InitialCondition',
    'initialize',
    'apply_event',
    'simulate',
    'deviation_summary',
    'compare_limiter',
]
