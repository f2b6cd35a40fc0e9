"""
Power regulator: pulls an inverter's apparent output down to its real-time capacity.

The PI output u is split between the frequency and voltage droop channels by the
allocation gains k_w and k_v. The capacity error is one-sided, so the regulator can
only reduce output.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.utils.errors import ConfigurationError

DEFAULT_RAMP_TIME = 0.1


@dataclass(frozen=True)
class PowerRegulatorParams:
    kp_s: float = 1.0
    ki_s: float = 16.0
    k_w: float = 0.004
    k_v: float = 0.008
    s_ref: float = 1.0
    enabled: bool = False

    def __post_init__(self):
        for name in ("kp_s", "ki_s", "k_w", "k_v", "s_ref"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"Power regulator {name} must be finite and >= 0, got {value}")
        if self.enabled and self.k_w + self.k_v <= 0:
            raise ConfigurationError("Enabled power regulator needs k_w + k_v > 0")


def capacity_error(s_ref: float, s_m: float) -> float:
    """Zero while there is headroom, otherwise the (non-positive) excess s_ref - s_m."""
    if s_ref > s_m:
        return 0.0
    return s_ref - s_m


def power_regulator_step(
    params: PowerRegulatorParams,
    xi_s: float,
    e_s: float,
) -> Tuple[float, float, float]:
    """
    PI on the capacity error, split into the frequency and voltage references.

    Args:
        params: Gains and capacity; a disabled regulator outputs nothing and holds.
        xi_s: Integrator state.
        e_s: Capacity error from ``capacity_error``.

    Returns:
        (dw1, dv1, d(xi_s)/dt).
    """
    if not params.enabled:
        return 0.0, 0.0, 0.0
    u = params.kp_s * e_s + params.ki_s * xi_s
    return params.k_w * u, params.k_v * u, e_s


def allocation_from_power_factor(pf: float) -> float:
    """k_w / k_v ratio for a load power factor: tan(arccos(pf))."""
    if not 0.0 < pf <= 1.0:
        raise ConfigurationError(f"Power factor must be in (0, 1], got {pf}")
    return float(np.tan(np.arccos(pf)))


def allocation_gains(pf: float, k_v: float) -> Tuple[float, float]:
    """Absolute (k_w, k_v) for a given voltage-channel gain."""
    return allocation_from_power_factor(pf) * k_v, k_v


def ramp_factor(t: float, t_enabled: float, ramp_time: float = DEFAULT_RAMP_TIME) -> float:
    """Linear 0 -> 1 ramp starting at ``t_enabled``."""
    if t < t_enabled:
        return 0.0
    if ramp_time <= 0:
        return 1.0
    return float(min(1.0, (t - t_enabled) / ramp_time))
