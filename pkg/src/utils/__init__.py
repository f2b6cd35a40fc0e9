"""
Utility modules for the microgrid toolkit.
"""
from src.utils.errors import (
    MicrogridError,
    ConfigurationError,
    NumericalError,
    NonConvergence,
    SingularJacobian,
    InfeasiblePoint,
    BreakpointAmbiguity,
    SingularAlgebraicBlock,
    SimulationCollapse,
    ShedFloorReached,
)

__all__ = [
    'MicrogridError',
    'ConfigurationError',
    'NumericalError',
    'NonConvergence',
    'SingularJacobian',
    'InfeasiblePoint',
    'BreakpointAmbiguity',
    'SingularAlgebraicBlock',
    'SimulationCollapse',
    'ShedFloorReached',
]
