"""
V-f regulator: deadband PI channels with trigger logic.

Deviations are taken as df = f0 - f_m and dv = V0 - V_m, so a positive deadband
error means the quantity sits below its band and its loop needs more capacity.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
from loguru import logger

from src.regulators.power_regulator import PowerRegulatorParams
from src.utils.errors import ConfigurationError


class Action(str, Enum):
    NONE = "none"
    REALLOCATE = "reallocate"
    SHED = "shed"


@dataclass(frozen=True)
class VfRegulatorParams:
    kp_f: float = 0.05
    ki_f: float = 1.0
    kp_v: float = 0.05
    ki_v: float = 1.0
    df_max: float = 0.01
    dv_max: float = 0.05
    enabled: bool = False
    w_limit: float = 0.05
    v_limit: float = 0.1
    shed_fraction: float = 0.03

    def __post_init__(self):
        for name in ("kp_f", "ki_f", "kp_v", "ki_v"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"V-f regulator {name} must be finite and >= 0, got {value}")
        for name in ("df_max", "dv_max", "w_limit", "v_limit"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"V-f regulator {name} must be > 0")


@dataclass
class RegulatorState:
    xi_s: float = 0.0
    xi_f: float = 0.0
    xi_v: float = 0.0
    state_f: int = 0
    state_v: int = 0
    shed_request: bool = False
    shed_magnitude: float = 0.0


@dataclass(frozen=True)
class SupplementarySignals:
    dw_total: float = 0.0
    dv_total: float = 0.0
    saturated: bool = False


@dataclass(frozen=True)
class VfRegulatorOutput:
    dw2: float
    dv2: float
    dxi_f: float
    dxi_v: float
    shed_request: bool = False
    shed_magnitude: float = 0.0


def deadband(x: float, x_max: float) -> float:
    """Three-branch deadband: zero inside [-x_max, x_max], offset by x_max outside."""
    if x_max <= 0:
        raise ValueError(f"Deadband half-width must be positive, got {x_max}")
    if x < -x_max:
        return x + x_max
    if x > x_max:
        return x - x_max
    return 0.0


def deadband_f(df: float, df_max: float) -> float:
    return deadband(df, df_max)


def deadband_v(dv: float, dv_max: float) -> float:
    return deadband(dv, dv_max)


def trigger_logic(e_f: float, e_v: float) -> Tuple[int, int, Action]:
    """Both loops short of capacity -> SHED; neither -> NONE; one -> REALLOCATE."""
    state_f = 1 if e_f > 0 else 0
    state_v = 1 if e_v > 0 else 0
    if state_f and state_v:
        return state_f, state_v, Action.SHED
    if not state_f and not state_v:
        return state_f, state_v, Action.NONE
    return state_f, state_v, Action.REALLOCATE


def vf_regulator_step(
    params: VfRegulatorParams,
    state: RegulatorState,
    e_f: float,
    e_v: float,
    action: Action,
    s_ref: float = 0.0,
) -> VfRegulatorOutput:
    """
    One evaluation of the V-f channels.

    Only REALLOCATE integrates; otherwise the outputs hold at their integral parts so
    they stay continuous when the errors leave the band edge.

    Args:
        params: Gains, limits and shed fraction.
        state: Current integrator values.
        e_f: Deadbanded frequency error.
        e_v: Deadbanded voltage error.
        action: Output of ``trigger_logic`` for the same errors.
        s_ref: Capacity used to size a shed request.

    Returns:
        Supplementary signals, integrator derivatives and any shed request.
    """
    if not params.enabled:
        return VfRegulatorOutput(0.0, 0.0, 0.0, 0.0)

    if action is Action.REALLOCATE:
        return VfRegulatorOutput(
            dw2=params.kp_f * e_f + params.ki_f * state.xi_f,
            dv2=params.kp_v * e_v + params.ki_v * state.xi_v,
            dxi_f=e_f,
            dxi_v=e_v,
        )

    held_w = params.ki_f * state.xi_f
    held_v = params.ki_v * state.xi_v
    if action is Action.SHED:
        return VfRegulatorOutput(held_w, held_v, 0.0, 0.0, True, params.shed_fraction * s_ref)
    return VfRegulatorOutput(held_w, held_v, 0.0, 0.0)


def clamp_supplementary(
    dw_total: float,
    dv_total: float,
    params: VfRegulatorParams,
) -> SupplementarySignals:
    """Bound the summed supplementary signals; ``saturated`` freezes V-f integration."""
    dw = float(np.clip(dw_total, -params.w_limit, params.w_limit))
    dv = float(np.clip(dv_total, -params.v_limit, params.v_limit))
    return SupplementarySignals(dw, dv, saturated=(dw != dw_total or dv != dv_total))


def validate_priority(
    power: PowerRegulatorParams,
    vf: VfRegulatorParams,
    inverter_id: str = "",
) -> List[str]:
    """Warn when the V-f regulator integrates faster than the power regulator."""
    messages = []
    if power.ki_s < vf.ki_f:
        messages.append(f"ki_s={power.ki_s} < ki_f={vf.ki_f}")
    if power.ki_s < vf.ki_v:
        messages.append(f"ki_s={power.ki_s} < ki_v={vf.ki_v}")
    for message in messages:
        logger.warning(f"Inverter {inverter_id}: power regulator should dominate the V-f regulator ({message})")
    return messages
