"""
Multi-inverter differential-algebraic microgrid model.

Differential states x are the per-inverter states (17 in FULL fidelity, 8 in REDUCED);
algebraic variables y are voltage magnitudes and angles of every node that is not
held by an inverter. Inverter nodes are voltage sources: the filter capacitor in FULL
fidelity, the ideal droop source v_ref at angle delta in REDUCED fidelity.
"""
import copy
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config.settings import settings
from src.equilibrium.problem import DroopUnit, EquilibriumProblem, EquilibriumSolution
from src.grid.network import NetworkModel, injection_jacobian
from src.grid.topology import AugmentedNetwork, CouplingSpec
from src.grid.zip_load import LoadTable, ZipLoadParams
from src.inverter.control import droop_primary
from src.inverter.dynamics import GridInterface, inverter_derivatives, steady_state_from_power, to_common
from src.inverter.params import IDX as FULL_IDX
from src.inverter.params import STATE_NAMES, InverterParams, PrimarySignals
from src.regulators.power_regulator import (
    PowerRegulatorParams,
    capacity_error,
    power_regulator_step,
    ramp_factor,
)
from src.regulators.vf_regulator import (
    Action,
    RegulatorState,
    VfRegulatorParams,
    clamp_supplementary,
    deadband,
    trigger_logic,
    validate_priority,
    vf_regulator_step,
)
from src.utils.errors import BreakpointAmbiguity, ConfigurationError, SimulationCollapse

REDUCED_STATE_NAMES: Tuple[str, ...] = ("delta", "p_m", "q_m", "f_m", "v_m", "xi_s", "xi_f", "xi_v")
REDUCED_IDX = {name: k for k, name in enumerate(REDUCED_STATE_NAMES)}
LIMITER_RAMP_START = 2.0


class Fidelity(str, Enum):
    FULL = "full"
    REDUCED = "reduced"


@dataclass
class InverterUnit:
    id: str
    bus_id: str
    params: InverterParams = field(default_factory=InverterParams)
    power_reg: PowerRegulatorParams = field(default_factory=PowerRegulatorParams)
    vf_reg: VfRegulatorParams = field(default_factory=VfRegulatorParams)

    def droop_unit(self, supp_w: float = 0.0, supp_v: float = 0.0) -> DroopUnit:
        p = self.params
        return DroopUnit(
            inverter_id=self.id, bus_id=self.bus_id, k_df=p.k_df, k_dv=p.k_dv,
            p0=p.p0, q0=p.q0, f0=p.w0, v0=p.v0, r_c=p.r_c, x_c=p.l_c,
            supp_w=supp_w, supp_v=supp_v, capacity=self.power_reg.s_ref,
        )


@dataclass(frozen=True)
class LimiterSetting:
    """
    Current-limiter threshold. A ramped limiter starts at twice ``i_max``; an adaptive
    one follows s_ref / v0 when the capacity setpoint changes.
    """

    i_max: float
    active_power_priority: bool = True
    t_start: float = 0.0
    ramp_s: float = 0.0
    adaptive: bool = False

    def threshold(self, t: float) -> float:
        if self.ramp_s <= 0 or t >= self.t_start + self.ramp_s:
            return self.i_max
        frac = max(0.0, (t - self.t_start) / self.ramp_s)
        return self.i_max * (LIMITER_RAMP_START + (1.0 - LIMITER_RAMP_START) * frac)


@dataclass
class RuntimeInputs:
    """Everything events may change during a run."""

    bus_loads: Dict[str, Optional[ZipLoadParams]]
    power_regs: List[PowerRegulatorParams]
    vf_regs: List[VfRegulatorParams]
    power_enabled_at: List[Optional[float]]
    vf_enabled_at: List[Optional[float]]
    limiters: List[Optional[LimiterSetting]]
    tripped: List[bool]
    load_table: Optional[LoadTable] = None

    def copy(self) -> "RuntimeInputs":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class BranchSelection:
    """Piecewise branches frozen for linearization; sides are -1, 0 or +1 per deadband."""

    capacity_binding: Tuple[bool, ...]
    f_side: Tuple[int, ...]
    v_side: Tuple[int, ...]
    actions: Tuple[Action, ...]


@dataclass
class SupplementaryState:
    e_s: float = 0.0
    dw1: float = 0.0
    dv1: float = 0.0
    e_f: float = 0.0
    e_v: float = 0.0
    state_f: int = 0
    state_v: int = 0
    action: Action = Action.NONE
    dw2: float = 0.0
    dv2: float = 0.0
    dw_total: float = 0.0
    dv_total: float = 0.0
    rates: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    shed_request: bool = False
    shed_magnitude: float = 0.0


@dataclass
class Snapshot:
    """Algebraic by-products of one evaluation, used for traces and events."""

    v: np.ndarray
    theta: np.ndarray
    w_common: float
    p: np.ndarray
    q: np.ndarray
    w_ref: np.ndarray
    supplementary: List[SupplementaryState]
    limited: List[bool]
    y: np.ndarray
    balance: float = 0.0


def _side(x: float, x_max: float) -> int:
    if x > x_max:
        return 1
    if x < -x_max:
        return -1
    return 0


def _forced_deadband(x: float, x_max: float, side: int) -> float:
    if side > 0:
        return x - x_max
    if side < 0:
        return x + x_max
    return 0.0


class MicrogridModel:
    """Inverters, regulators and network assembled into one DAE right-hand side."""

    def __init__(
        self,
        network: NetworkModel,
        inverters: Sequence[InverterUnit],
        fidelity: Fidelity = Fidelity.REDUCED,
        network_tol: Optional[float] = None,
        network_max_iter: Optional[int] = None,
        collapse_voltage: Optional[float] = None,
    ):
        if not inverters:
            raise ConfigurationError("A microgrid model needs at least one inverter")
        self.network = network
        self.inverters = list(inverters)
        self.fidelity = Fidelity(fidelity)
        self.net = AugmentedNetwork(
            network, [CouplingSpec(u.id, u.bus_id, u.params.r_c, u.params.l_c) for u in self.inverters]
        )
        self.w_base = network.base.w_base
        self.network_tol = settings.network_tol if network_tol is None else network_tol
        self.network_max_iter = settings.network_max_iter if network_max_iter is None else network_max_iter
        self.collapse_voltage = settings.collapse_voltage if collapse_voltage is None else collapse_voltage

        if self.fidelity is Fidelity.FULL:
            missing = [u.id for u in self.inverters if u.params.l_c <= 0]
            if missing:
                raise ConfigurationError(f"Full fidelity needs a coupling inductance on every inverter: {missing}")
            self.names, self.idx = STATE_NAMES, FULL_IDX
        else:
            self.names, self.idx = REDUCED_STATE_NAMES, REDUCED_IDX
        self.n_per = len(self.names)
        self.n_x = self.n_per * len(self.inverters)

        for unit in self.inverters:
            validate_priority(unit.power_reg, unit.vf_reg, unit.id)
        logger.debug(f"Microgrid model: {len(self.inverters)} inverters, {self.fidelity.value} fidelity, "
                     f"{self.n_x} states")

    # Layout

    def with_fidelity(self, fidelity: Fidelity) -> "MicrogridModel":
        return MicrogridModel(self.network, self.inverters, fidelity, self.network_tol,
                              self.network_max_iter, self.collapse_voltage)

    def with_inverters(self, inverters: Sequence[InverterUnit]) -> "MicrogridModel":
        return MicrogridModel(self.network, inverters, self.fidelity, self.network_tol,
                              self.network_max_iter, self.collapse_voltage)

    def with_network_tol(self, network_tol: float) -> "MicrogridModel":
        return MicrogridModel(self.network, self.inverters, self.fidelity, network_tol,
                              self.network_max_iter, self.collapse_voltage)

    @property
    def n_inverter(self) -> int:
        return len(self.inverters)

    def block(self, k: int) -> slice:
        return slice(k * self.n_per, (k + 1) * self.n_per)

    def state_index(self, k: int, name: str) -> int:
        return k * self.n_per + self.idx[name]

    @property
    def state_labels(self) -> List[str]:
        return [f"inv{u.id}_{name}" for u in self.inverters for name in self.names]

    def inverter_index(self, inverter_id: str) -> int:
        for k, unit in enumerate(self.inverters):
            if unit.id == inverter_id:
                return k
        raise ConfigurationError(f"Unknown inverter id: {inverter_id}")

    def default_inputs(self) -> RuntimeInputs:
        inputs = RuntimeInputs(
            bus_loads=self.net.base_bus_loads(),
            power_regs=[u.power_reg for u in self.inverters],
            vf_regs=[u.vf_reg for u in self.inverters],
            power_enabled_at=[None] * self.n_inverter,
            vf_enabled_at=[None] * self.n_inverter,
            limiters=[None] * self.n_inverter,
            tripped=[False] * self.n_inverter,
        )
        self.refresh_loads(inputs)
        return inputs

    def refresh_loads(self, inputs: RuntimeInputs):
        inputs.load_table = self.net.load_table(inputs.bus_loads)

    def active_inverters(self, inputs: RuntimeInputs) -> List[int]:
        return [k for k in range(self.n_inverter) if not inputs.tripped[k]]

    def reference(self, inputs: RuntimeInputs) -> int:
        active = self.active_inverters(inputs)
        if not active:
            raise SimulationCollapse("Every inverter has tripped")
        return active[0]

    def unknown_nodes(self, inputs: RuntimeInputs) -> np.ndarray:
        sources = {int(self.net.inverter_node[k]) for k in self.active_inverters(inputs)}
        return np.array([n for n in range(self.net.n_node) if n not in sources], dtype=int)

    def algebraic_labels(self, inputs: RuntimeInputs) -> List[str]:
        ids = self.net.node_ids
        nodes = self.unknown_nodes(inputs)
        return [f"V_{ids[n]}" for n in nodes] + [f"theta_{ids[n]}" for n in nodes]

    # Controls

    def measurements(self, xk: np.ndarray) -> Tuple[float, float, float]:
        """(s_m, f_m, V_m) as seen by the supplementary regulators."""
        idx = self.idx
        s_m = float(np.hypot(xk[idx["p_m"]], xk[idx["q_m"]]))
        if self.fidelity is Fidelity.FULL:
            v_m = float(np.hypot(xk[idx["v_d"]], xk[idx["v_q"]]))
        else:
            v_m = float(xk[idx["v_m"]])
        return s_m, float(xk[idx["f_m"]]), v_m

    def supplementary(
        self,
        k: int,
        xk: np.ndarray,
        t: float,
        inputs: RuntimeInputs,
        branch: Optional[BranchSelection] = None,
    ) -> SupplementaryState:
        unit = self.inverters[k]
        pr, vr = inputs.power_regs[k], inputs.vf_regs[k]
        idx = self.idx
        s_m, f_m, v_m = self.measurements(xk)

        if branch is not None:
            e_s = pr.s_ref - s_m if branch.capacity_binding[k] else 0.0
        else:
            e_s = capacity_error(pr.s_ref, s_m)
        dw1, dv1, dxi_s = power_regulator_step(pr, xk[idx["xi_s"]], e_s)
        if inputs.power_enabled_at[k] is not None:
            r = ramp_factor(t, inputs.power_enabled_at[k])
            dw1, dv1 = dw1 * r, dv1 * r

        df = unit.params.w0 - f_m
        dv = unit.params.v0 - v_m
        if branch is not None:
            e_f = _forced_deadband(df, vr.df_max, branch.f_side[k])
            e_v = _forced_deadband(dv, vr.dv_max, branch.v_side[k])
            state_f, state_v, action = int(e_f > 0), int(e_v > 0), branch.actions[k]
        else:
            e_f = deadband(df, vr.df_max)
            e_v = deadband(dv, vr.dv_max)
            state_f, state_v, action = trigger_logic(e_f, e_v)

        reg_state = RegulatorState(xi_s=xk[idx["xi_s"]], xi_f=xk[idx["xi_f"]], xi_v=xk[idx["xi_v"]],
                                   state_f=state_f, state_v=state_v)
        out = vf_regulator_step(vr, reg_state, e_f, e_v, action, pr.s_ref)
        dw2, dv2 = out.dw2, out.dv2
        if inputs.vf_enabled_at[k] is not None:
            r = ramp_factor(t, inputs.vf_enabled_at[k])
            dw2, dv2 = dw2 * r, dv2 * r

        clamped = clamp_supplementary(dw1 + dw2, dv1 + dv2, vr)
        dxi_f, dxi_v = (0.0, 0.0) if clamped.saturated else (out.dxi_f, out.dxi_v)
        return SupplementaryState(
            e_s=e_s, dw1=dw1, dv1=dv1, e_f=e_f, e_v=e_v, state_f=state_f, state_v=state_v,
            action=action if vr.enabled else Action.NONE, dw2=dw2, dv2=dv2,
            dw_total=clamped.dw_total, dv_total=clamped.dv_total,
            rates=(dxi_s, dxi_f, dxi_v), shed_request=out.shed_request, shed_magnitude=out.shed_magnitude,
        )

    def primary(self, k: int, xk: np.ndarray, supp: SupplementaryState) -> PrimarySignals:
        return droop_primary(self.inverters[k].params, xk[self.idx["p_m"]], xk[self.idx["q_m"]],
                             supp.dw_total, supp.dv_total)

    def _controls(self, x: np.ndarray, t: float, inputs: RuntimeInputs, branch: Optional[BranchSelection]):
        supps, prims, sources = [], [], []
        for k in range(self.n_inverter):
            xk = x[self.block(k)]
            supp = self.supplementary(k, xk, t, inputs, branch)
            prim = self.primary(k, xk, supp)
            if self.fidelity is Fidelity.FULL:
                source = to_common(xk[self.idx["v_d"]], xk[self.idx["v_q"]], xk[self.idx["delta"]])
            else:
                source = prim.v_ref * np.exp(1j * xk[self.idx["delta"]])
            supps.append(supp)
            prims.append(prim)
            sources.append(source)
        w_common = prims[self.reference(inputs)].w_ref
        return supps, prims, np.array(sources, dtype=complex), w_common

    # Network

    def _assemble(self, sources: np.ndarray, y: np.ndarray, inputs: RuntimeInputs, unknown: np.ndarray):
        v = np.ones(self.net.n_node)
        theta = np.zeros(self.net.n_node)
        for k in self.active_inverters(inputs):
            node = self.net.inverter_node[k]
            v[node] = abs(sources[k])
            theta[node] = np.angle(sources[k])
        m = len(unknown)
        v[unknown] = y[:m]
        theta[unknown] = y[m:]
        return v, theta

    def _mismatch(self, v, theta, f, inputs, unknown):
        vc = v * np.exp(1j * theta)
        s_inj = vc * np.conj(self.net.y_matrix @ vc)
        p_l, q_l = inputs.load_table.evaluate(v, f)
        return np.concatenate((s_inj.real[unknown] + p_l[unknown], s_inj.imag[unknown] + q_l[unknown]))

    def g(self, x: np.ndarray, y: np.ndarray, t: float, inputs: RuntimeInputs,
          branch: Optional[BranchSelection] = None) -> np.ndarray:
        """Power mismatch at every non-source node."""
        _, _, sources, w_common = self._controls(x, t, inputs, branch)
        unknown = self.unknown_nodes(inputs)
        v, theta = self._assemble(sources, y, inputs, unknown)
        return self._mismatch(v, theta, w_common, inputs, unknown)

    def initial_guess(self, inputs: RuntimeInputs) -> np.ndarray:
        m = len(self.unknown_nodes(inputs))
        return np.concatenate((np.ones(m), np.zeros(m)))

    def solve_network(
        self,
        x: np.ndarray,
        t: float,
        inputs: RuntimeInputs,
        y_guess: Optional[np.ndarray] = None,
        branch: Optional[BranchSelection] = None,
    ) -> np.ndarray:
        """Newton solve of the non-source node voltages with inverter voltages held fixed."""
        _, _, sources, w_common = self._controls(x, t, inputs, branch)
        return self._solve_network(sources, w_common, t, inputs, y_guess)

    def _solve_network(self, sources, w_common, t, inputs, y_guess):
        unknown = self.unknown_nodes(inputs)
        m = len(unknown)
        y = self.initial_guess(inputs) if y_guess is None or len(y_guess) != 2 * m else np.array(y_guess, float)
        if m == 0:
            return y

        for _ in range(self.network_max_iter + 1):
            v, theta = self._assemble(sources, y, inputs, unknown)
            mis = self._mismatch(v, theta, w_common, inputs, unknown)
            if not np.all(np.isfinite(mis)):
                break
            if np.max(np.abs(mis)) <= self.network_tol:
                if np.min(v) < self.collapse_voltage:
                    raise SimulationCollapse(
                        f"Voltage collapse at t={t:.4f}s: min |V| = {np.min(v):.3f} p.u.", time=t)
                return y
            ds_dvm, ds_dva = injection_jacobian(self.net.y_matrix, v, theta)
            sens = inputs.load_table.sensitivities(v, w_common)
            sub = np.ix_(unknown, unknown)
            jac = np.block([
                [ds_dvm.real[sub] + np.diag(sens["dp_dv"][unknown]), ds_dva.real[sub]],
                [ds_dvm.imag[sub] + np.diag(sens["dq_dv"][unknown]), ds_dva.imag[sub]],
            ])
            try:
                y = y + np.linalg.solve(jac, -mis)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(y)) or np.min(y[:m]) < self.collapse_voltage:
                break
        raise SimulationCollapse(f"Network solve diverged at t={t:.4f}s", time=t)

    # Dynamics

    def evaluate(
        self,
        x: np.ndarray,
        y: np.ndarray,
        t: float,
        inputs: RuntimeInputs,
        branch: Optional[BranchSelection] = None,
        solve: bool = False,
    ) -> Tuple[np.ndarray, Snapshot]:
        """
        Differential right-hand side at (x, y). With ``solve`` the network is first
        re-solved using ``y`` as the initial guess.
        """
        supps, prims, sources, w_common = self._controls(x, t, inputs, branch)
        if solve:
            y = self._solve_network(sources, w_common, t, inputs, y)
        unknown = self.unknown_nodes(inputs)
        v, theta = self._assemble(sources, y, inputs, unknown)
        currents = self.net.node_currents(v, theta, inputs.load_table, w_common)
        vc = v * np.exp(1j * theta)
        p_load, _ = inputs.load_table.evaluate(v, w_common)
        p_net = (vc * np.conj(self.net.y_matrix @ vc)).real
        sources_idx = self.net.inverter_node[self.active_inverters(inputs)]
        balance = float(np.sum(p_net[sources_idx] + p_load[sources_idx]) - np.sum(p_load)
                        - self.net.losses(v, theta))

        dx = np.zeros(self.n_x)
        p = np.zeros(self.n_inverter)
        q = np.zeros(self.n_inverter)
        limited = [False] * self.n_inverter
        for k in self.active_inverters(inputs):
            node = self.net.inverter_node[k]
            xk = x[self.block(k)]
            s_out = vc[node] * np.conj(currents[node])
            if self.fidelity is Fidelity.FULL:
                lim = inputs.limiters[k]
                grid = GridInterface(
                    v_bus=vc[self.net.inverter_bus_node[k]],
                    w_common=w_common,
                    w_base=self.w_base,
                    i_max=lim.threshold(t) if lim is not None else None,
                    active_power_priority=lim.active_power_priority if lim is not None else True,
                    regulator_rates=supps[k].rates,
                )
                dxk, outputs = inverter_derivatives(self.inverters[k].params, xk, prims[k], grid,
                                                    return_outputs=True)
                p[k], q[k], limited[k] = outputs.p_inst, outputs.q_inst, outputs.limited
            else:
                dxk = self._reduced_derivatives(k, xk, prims[k], supps[k], s_out, v[node], w_common)
                p[k], q[k] = s_out.real, s_out.imag
            dx[self.block(k)] = dxk

        w_ref = np.array([pr.w_ref for pr in prims])
        return dx, Snapshot(v, theta, w_common, p, q, w_ref, supps, limited, np.asarray(y, float), balance)

    def _reduced_derivatives(self, k, xk, prim, supp, s_out, v_node, w_common) -> np.ndarray:
        params = self.inverters[k].params
        idx = REDUCED_IDX
        cutoff = params.pm_filter_cutoff
        dxk = np.zeros(self.n_per)
        dxk[idx["delta"]] = (prim.w_ref - w_common) * self.w_base
        dxk[idx["p_m"]] = cutoff * (s_out.real - xk[idx["p_m"]])
        dxk[idx["q_m"]] = cutoff * (s_out.imag - xk[idx["q_m"]])
        dxk[idx["f_m"]] = cutoff * (prim.w_ref - xk[idx["f_m"]])
        dxk[idx["v_m"]] = cutoff * (v_node - xk[idx["v_m"]])
        dxk[idx["xi_s"]], dxk[idx["xi_f"]], dxk[idx["xi_v"]] = supp.rates
        return dxk

    def f(self, x: np.ndarray, y: np.ndarray, t: float, inputs: RuntimeInputs,
          branch: Optional[BranchSelection] = None) -> np.ndarray:
        return self.evaluate(x, y, t, inputs, branch)[0]

    # Equilibrium coupling

    def equilibrium_problem(
        self,
        inputs: Optional[RuntimeInputs] = None,
        supp_w: Optional[Sequence[float]] = None,
        supp_v: Optional[Sequence[float]] = None,
    ) -> EquilibriumProblem:
        inputs = inputs or self.default_inputs()
        supp_w = supp_w if supp_w is not None else [0.0] * self.n_inverter
        supp_v = supp_v if supp_v is not None else [0.0] * self.n_inverter
        units = []
        for unit, pr, w, v in zip(self.inverters, inputs.power_regs, supp_w, supp_v):
            units.append(replace(unit.droop_unit(w, v), capacity=pr.s_ref))
        return EquilibriumProblem(network=self.network, inverters=tuple(units), loads=dict(inputs.bus_loads))

    def initial_state(self, solution: EquilibriumSolution, inputs: RuntimeInputs) -> Tuple[np.ndarray, np.ndarray]:
        """Back-solve every differential state from an equilibrium; regulator integrators start at zero."""
        x0 = np.zeros(self.n_x)
        for k, unit in enumerate(self.inverters):
            node = self.net.inverter_node[k]
            p, q = solution.p_inv[k], solution.q_inv[k]
            v, theta = solution.v[node], solution.theta[node]
            if self.fidelity is Fidelity.FULL:
                xk = steady_state_from_power(unit.params, p, q, v, theta, solution.f).as_array()
            else:
                xk = np.zeros(self.n_per)
                xk[REDUCED_IDX["delta"]] = theta
                xk[REDUCED_IDX["p_m"]] = p
                xk[REDUCED_IDX["q_m"]] = q
                xk[REDUCED_IDX["f_m"]] = solution.f
                xk[REDUCED_IDX["v_m"]] = v
            x0[self.block(k)] = xk
        unknown = self.unknown_nodes(inputs)
        y0 = np.concatenate((solution.v[unknown], solution.theta[unknown]))
        return x0, y0

    def branch_selection(self, x: np.ndarray, inputs: RuntimeInputs, tol: float = 1e-9) -> BranchSelection:
        """
        Piecewise branches active at ``x``. The capacity branch counts as binding once
        the power-regulator integrator has moved; a deadband edge is ambiguous.
        """
        binding, f_side, v_side, actions = [], [], [], []
        for k, unit in enumerate(self.inverters):
            xk = x[self.block(k)]
            pr, vr = inputs.power_regs[k], inputs.vf_regs[k]
            s_m, f_m, v_m = self.measurements(xk)
            binding.append(bool(pr.enabled and (xk[self.idx["xi_s"]] != 0.0 or s_m > pr.s_ref)))
            df = unit.params.w0 - f_m
            dv = unit.params.v0 - v_m
            if vr.enabled:
                if abs(abs(df) - vr.df_max) <= tol or abs(abs(dv) - vr.dv_max) <= tol:
                    raise BreakpointAmbiguity(
                        f"Inverter {unit.id} sits on a deadband edge (df={df:.6g}, dv={dv:.6g}); "
                        "offset the operating point before linearizing"
                    )
            fs, vs = _side(df, vr.df_max), _side(dv, vr.dv_max)
            f_side.append(fs)
            v_side.append(vs)
            actions.append(trigger_logic(_forced_deadband(df, vr.df_max, fs),
                                         _forced_deadband(dv, vr.dv_max, vs))[2])
        return BranchSelection(tuple(binding), tuple(f_side), tuple(v_side), tuple(actions))
