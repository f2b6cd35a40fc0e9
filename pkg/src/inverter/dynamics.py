"""
Full 17-state dynamics of one grid-forming inverter and the dq frame transforms.
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from src.inverter.control import (
    current_limiter_baseline,
    current_regulator_step,
    filter_and_measure,
    voltage_regulator_step,
)
from src.inverter.params import IDX, N_STATES, InverterParams, InverterState, PrimarySignals
from src.utils.errors import ConfigurationError, SimulationCollapse


def to_common(d: float, q: float, delta: float) -> complex:
    """Local dq quantity to a phasor in the common network frame."""
    return complex(d, q) * np.exp(1j * delta)


def to_local(phasor: complex, delta: float) -> Tuple[float, float]:
    """Common-frame phasor to the local dq frame rotated by ``delta``."""
    local = phasor * np.exp(-1j * delta)
    return float(local.real), float(local.imag)


@dataclass(frozen=True)
class GridInterface:
    """
    What the network and the supplementary regulators hand to one inverter.

    ``v_bus`` is the voltage of the bus behind the coupling branch, in the common frame.
    """

    v_bus: complex
    w_common: float
    w_base: float
    i_max: Optional[float] = None
    active_power_priority: bool = True
    regulator_rates: Tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class InverterOutputs:
    """Algebraic by-products of one derivative evaluation."""

    p_inst: float
    q_inst: float
    i_dref: float
    i_qref: float
    limited: bool


def inverter_derivatives(
    params: InverterParams,
    state: Union[InverterState, np.ndarray],
    primary: PrimarySignals,
    grid: GridInterface,
    return_outputs: bool = False,
):
    """
    Time derivatives of the 17 inverter states.

    The LC filter runs on the inverter's own frequency w_ref. The coupling inductor sees
    the bus voltage through its reactance at nominal frequency, the same reactance the
    quasi-static network uses. The frame angle advances with w_ref relative to the
    common frequency.

    Args:
        params: Filter, control and droop parameters; ``l_c`` must be positive.
        state: The 17 states, named or as an array.
        primary: Droop outputs w_ref and v_ref.
        grid: Bus voltage, common frequency, limiter threshold and regulator rates.
        return_outputs: Also return the algebraic by-products.

    Returns:
        The derivative array, plus an ``InverterOutputs`` when ``return_outputs`` is set.

    Raises:
        ConfigurationError: If the inverter has no coupling inductance.
        SimulationCollapse: If the state is not finite.
    """
    if params.l_c <= 0:
        raise ConfigurationError("Full-fidelity inverters need a coupling inductance l_c > 0")
    x = state.as_array() if isinstance(state, InverterState) else np.asarray(state, dtype=float)
    if not np.all(np.isfinite(x)):
        raise SimulationCollapse("Non-finite inverter state detected", last_state=x.copy())
    st = state if isinstance(state, InverterState) else InverterState.from_array(x)

    w = primary.w_ref
    w_base = grid.w_base
    i_dref, i_qref, dphi_vd, dphi_vq = voltage_regulator_step(params, st, primary.v_ref, 0.0, w)

    limited = False
    if grid.i_max is not None:
        clamped = current_limiter_baseline(i_dref, i_qref, grid.i_max, grid.active_power_priority)
        limited = clamped != (i_dref, i_qref)
        i_dref, i_qref = clamped
        if limited:
            # anti-windup: the outer integrators hold while the limiter clamps
            dphi_vd = dphi_vq = 0.0

    e_d, e_q, dphi_id, dphi_iq = current_regulator_step(params, st, i_dref, i_qref, w)

    di_d = (w_base / params.l_f) * (e_d - st.v_d - params.r_f * st.i_d + w * params.l_f * st.i_q)
    di_q = (w_base / params.l_f) * (e_q - st.v_q - params.r_f * st.i_q - w * params.l_f * st.i_d)
    dv_d = (w_base / params.c_f) * (st.i_d - st.i_gd + w * params.c_f * st.v_q)
    dv_q = (w_base / params.c_f) * (st.i_q - st.i_gq - w * params.c_f * st.v_d)

    vb_d, vb_q = to_local(grid.v_bus, st.delta)
    di_gd = (w_base / params.l_c) * (st.v_d - vb_d - params.r_c * st.i_gd + params.l_c * st.i_gq)
    di_gq = (w_base / params.l_c) * (st.v_q - vb_q - params.r_c * st.i_gq - params.l_c * st.i_gd)

    p_inst, q_inst, dp_m, dq_m = filter_and_measure(st, params)
    df_m = params.pm_filter_cutoff * (w - st.f_m)
    ddelta = (w - grid.w_common) * w_base

    dx = np.zeros(N_STATES)
    dx[IDX["delta"]] = ddelta
    dx[IDX["phi_id"]] = dphi_id
    dx[IDX["phi_iq"]] = dphi_iq
    dx[IDX["phi_vd"]] = dphi_vd
    dx[IDX["phi_vq"]] = dphi_vq
    dx[IDX["i_d"]] = di_d
    dx[IDX["i_q"]] = di_q
    dx[IDX["v_d"]] = dv_d
    dx[IDX["v_q"]] = dv_q
    dx[IDX["i_gd"]] = di_gd
    dx[IDX["i_gq"]] = di_gq
    dx[IDX["p_m"]] = dp_m
    dx[IDX["q_m"]] = dq_m
    dx[IDX["f_m"]] = df_m
    dx[IDX["xi_s"]], dx[IDX["xi_f"]], dx[IDX["xi_v"]] = grid.regulator_rates

    if return_outputs:
        return dx, InverterOutputs(p_inst, q_inst, i_dref, i_qref, limited)
    return dx


def steady_state_from_power(
    params: InverterParams,
    p: float,
    q: float,
    v: float,
    theta: float,
    f: float,
) -> InverterState:
    """
    Back-solve all 17 states from a terminal operating point (P, Q, |V|, angle, f).

    The dq frame is aligned with the capacitor voltage, so v_q = 0 and delta = theta.
    """
    i_gd = p / v
    i_gq = -q / v
    i_d = i_gd
    i_q = i_gq + f * params.c_f * v
    return InverterState(
        delta=theta,
        phi_id=params.r_f * i_d / params.ki_i if params.ki_i > 0 else 0.0,
        phi_iq=params.r_f * i_q / params.ki_i if params.ki_i > 0 else 0.0,
        phi_vd=0.0,
        phi_vq=0.0,
        i_d=i_d,
        i_q=i_q,
        v_d=v,
        v_q=0.0,
        i_gd=i_gd,
        i_gq=i_gq,
        p_m=p,
        q_m=q,
        f_m=f,
    )
