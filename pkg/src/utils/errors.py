"""
Exception hierarchy shared by the grid, equilibrium, small-signal and time-domain engines.
"""
from typing import Any, Dict, Optional

import numpy as np


class MicrogridError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(MicrogridError):
    """Invalid scenario, parameter set or cross-reference."""


class NumericalError(MicrogridError):
    """A numerical engine failed to produce a trustworthy result."""


class NonConvergence(NumericalError):
    """Newton iteration hit its cap; carries the best iterate seen."""

    def __init__(
        self,
        message: str,
        best_iterate: Optional[np.ndarray] = None,
        diagnostics: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.diagnostics = diagnostics or {}


class SingularJacobian(NumericalError):
    """The Newton Jacobian is singular: the configuration is ill-posed."""


class InfeasiblePoint(NumericalError):
    """No equilibrium exists for a given point on the capacity circle."""


class BreakpointAmbiguity(NumericalError):
    """The operating point sits exactly on a deadband breakpoint."""


class SingularAlgebraicBlock(NumericalError):
    """g_y is singular; carries the near-null vector for diagnosis."""

    def __init__(self, message: str, null_vector: Optional[np.ndarray] = None, condition: float = np.inf):
        super().__init__(message)
        self.null_vector = null_vector
        self.condition = condition


class SimulationCollapse(NumericalError):
    """The algebraic network diverged during time-domain simulation."""

    def __init__(self, message: str, time: float = 0.0, last_state: Optional[np.ndarray] = None):
        super().__init__(message)
        self.time = time
        self.last_state = last_state


class ShedFloorReached(NumericalError):
    """Load shedding hit the configured floor while a shed request was still active."""
