"""
Cascaded control of a droop grid-forming inverter.

All functions are pure: state in, commands and integrator rates out. Integrator
rates are per second; the droop, voltage and current laws work in p.u.
"""
from typing import Tuple

import numpy as np

from src.inverter.params import InverterParams, InverterState, PrimarySignals


def droop_primary(
    params: InverterParams,
    p_m: float,
    q_m: float,
    supp_w: float = 0.0,
    supp_v: float = 0.0,
) -> PrimarySignals:
    """w_ref = w0 + k_df (p0 - p_m) + supp_w;  v_ref = v0 + k_dv (q0 - q_m) + supp_v."""
    w_ref = params.w0 + params.k_df * (params.p0 - p_m) + supp_w
    v_ref = params.v0 + params.k_dv * (params.q0 - q_m) + supp_v
    return PrimarySignals(w_ref=w_ref, v_ref=v_ref)


def voltage_regulator_step(
    params: InverterParams,
    state: InverterState,
    v_dref: float,
    v_qref: float,
    w: float,
) -> Tuple[float, float, float, float]:
    """
    PI on the capacitor voltage with decoupling and grid-current feed-forward.

    Returns (i_dref, i_qref, d(phi_vd)/dt, d(phi_vq)/dt).
    """
    err_d = v_dref - state.v_d
    err_q = v_qref - state.v_q
    i_dref = state.i_gd - w * params.c_f * state.v_q + params.kp_v * err_d + params.ki_v * state.phi_vd
    i_qref = state.i_gq + w * params.c_f * state.v_d + params.kp_v * err_q + params.ki_v * state.phi_vq
    return i_dref, i_qref, err_d, err_q


def current_regulator_step(
    params: InverterParams,
    state: InverterState,
    i_dref: float,
    i_qref: float,
    w: float,
) -> Tuple[float, float, float, float]:
    """
    PI on the filter current with inductor decoupling and voltage feed-forward.

    Returns (e_d, e_q, d(phi_id)/dt, d(phi_iq)/dt).
    """
    err_d = i_dref - state.i_d
    err_q = i_qref - state.i_q
    e_d = state.v_d - w * params.l_f * state.i_q + params.kp_i * err_d + params.ki_i * state.phi_id
    e_q = state.v_q + w * params.l_f * state.i_d + params.kp_i * err_q + params.ki_i * state.phi_iq
    return e_d, e_q, err_d, err_q


def filter_and_measure(state: InverterState, params: InverterParams) -> Tuple[float, float, float, float]:
    """Instantaneous dq output power and the low-pass rates of the measured powers."""
    p_inst = state.v_d * state.i_gd + state.v_q * state.i_gq
    q_inst = state.v_q * state.i_gd - state.v_d * state.i_gq
    dp_m = params.pm_filter_cutoff * (p_inst - state.p_m)
    dq_m = params.pm_filter_cutoff * (q_inst - state.q_m)
    return p_inst, q_inst, dp_m, dq_m


def current_limiter_baseline(
    i_dref: float,
    i_qref: float,
    i_max: float,
    active_power_priority: bool = True,
) -> Tuple[float, float]:
    """
    Clamp the current reference to a circle of radius ``i_max``.

    With active-power priority the d axis keeps up to ``i_max`` and the q axis gets the
    remainder (sign preserved); otherwise the vector is scaled radially.
    """
    if i_max <= 0:
        raise ValueError(f"i_max must be positive, got {i_max}")
    magnitude = float(np.hypot(i_dref, i_qref))
    if magnitude <= i_max:
        return i_dref, i_qref
    if active_power_priority:
        i_d = float(np.clip(i_dref, -i_max, i_max))
        room = np.sqrt(max(i_max * i_max - i_d * i_d, 0.0))
        i_q = float(np.clip(i_qref, -room, room))
        return i_d, i_q
    scale = i_max / magnitude
    return i_dref * scale, i_qref * scale
