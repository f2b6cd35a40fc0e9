"""
Droop law, cascaded control, current limiter and the 17-state inverter dynamics.
"""
import numpy as np
import pytest

from src.grid.network import PerUnitBase
from src.inverter.control import current_limiter_baseline, droop_primary
from src.inverter.dynamics import GridInterface, inverter_derivatives, steady_state_from_power, to_common, to_local
from src.inverter.params import IDX, N_STATES, InverterParams, InverterState, capacitance_to_pu, inductance_to_pu
from src.utils.errors import ConfigurationError, SimulationCollapse

W_BASE = 2 * np.pi * 60


def test_state_layout():
    assert N_STATES == 17
    assert IDX["delta"] == 0
    assert IDX["xi_v"] == 16
    state = InverterState(p_m=0.3, q_m=0.4)
    assert state.s_m == pytest.approx(0.5)
    assert InverterState.from_array(state.as_array()) == state


@pytest.mark.parametrize("field", ["k_df", "l_f", "c_f", "s_rated"])
def test_non_positive_parameters_rejected(field):
    with pytest.raises(ConfigurationError):
        InverterParams(**{field: 0.0})


def test_droop_primary():
    params = InverterParams(k_df=0.01, k_dv=0.05, p0=0.1, q0=0.0)
    signals = droop_primary(params, p_m=0.5, q_m=0.2, supp_w=0.001, supp_v=-0.002)
    assert signals.w_ref == pytest.approx(1.0 + 0.01 * (0.1 - 0.5) + 0.001)
    assert signals.v_ref == pytest.approx(1.0 + 0.05 * (0.0 - 0.2) - 0.002)


def test_frame_transforms():
    assert to_common(1.0, 0.0, np.pi / 2) == pytest.approx(1j)
    assert to_local(1j, np.pi / 2) == pytest.approx((1.0, 0.0))


def test_unit_conversion_to_per_unit():
    base = PerUnitBase()
    z_base = 12.47e3 ** 2 / 10e6
    assert inductance_to_pu(5e-3, base) == pytest.approx(W_BASE * 5e-3 / z_base)
    assert capacitance_to_pu(1e-5, base) == pytest.approx(W_BASE * 1e-5 * z_base)


class TestCurrentLimiter:
    def test_inside_circle_untouched(self):
        assert current_limiter_baseline(0.3, 0.4, 1.0) == (0.3, 0.4)

    def test_active_power_priority(self):
        i_d, i_q = current_limiter_baseline(1.0, 1.0, 1.2, active_power_priority=True)
        assert i_d == pytest.approx(1.0)
        assert i_q == pytest.approx(np.sqrt(1.44 - 1.0))

    def test_active_power_priority_clips_d_axis(self):
        i_d, i_q = current_limiter_baseline(-2.0, 0.5, 1.0, active_power_priority=True)
        assert (i_d, i_q) == pytest.approx((-1.0, 0.0))

    def test_radial_scaling(self):
        i_d, i_q = current_limiter_baseline(3.0, 4.0, 1.0, active_power_priority=False)
        assert (i_d, i_q) == pytest.approx((0.6, 0.8))

    def test_positive_limit_required(self):
        with pytest.raises(ValueError):
            current_limiter_baseline(1.0, 0.0, 0.0)


class TestDynamics:
    params = InverterParams()

    def _operating_point(self, p=0.3, q=0.1, theta=0.2):
        primary = droop_primary(self.params, p, q)
        state = steady_state_from_power(self.params, p, q, primary.v_ref, theta, primary.w_ref)
        i_g = to_common(state.i_gd, state.i_gq, theta)
        v_bus = to_common(state.v_d, state.v_q, theta) - complex(self.params.r_c, self.params.l_c) * i_g
        grid = GridInterface(v_bus=v_bus, w_common=primary.w_ref, w_base=W_BASE)
        return state, primary, grid

    def test_back_solved_state_is_stationary(self):
        state, primary, grid = self._operating_point()
        dx = inverter_derivatives(self.params, state, primary, grid)
        assert np.max(np.abs(dx)) < 1e-10

    def test_back_solved_state_reproduces_powers(self):
        state, primary, grid = self._operating_point(p=0.25, q=-0.05)
        _, outputs = inverter_derivatives(self.params, state.as_array(), primary, grid, return_outputs=True)
        assert outputs.p_inst == pytest.approx(0.25)
        assert outputs.q_inst == pytest.approx(-0.05)
        assert not outputs.limited

    def test_bus_voltage_drop_drives_grid_current(self):
        state, primary, grid = self._operating_point(theta=0.0)
        grid = GridInterface(grid.v_bus - 0.01, grid.w_common, W_BASE)
        dx = inverter_derivatives(self.params, state, primary, grid)
        assert dx[IDX["i_gd"]] == pytest.approx(W_BASE / self.params.l_c * 0.01)
        assert dx[IDX["i_gq"]] == pytest.approx(0.0, abs=1e-9)

    def test_coupling_inductance_required(self):
        params = InverterParams(l_c=0.0)
        state = steady_state_from_power(params, 0.1, 0.0, 1.0, 0.0, 1.0)
        grid = GridInterface(1.0 + 0j, 1.0, W_BASE)
        with pytest.raises(ConfigurationError):
            inverter_derivatives(params, state, droop_primary(params, 0.1, 0.0), grid)

    def test_frame_angle_follows_frequency_difference(self):
        state, primary, grid = self._operating_point()
        grid = GridInterface(grid.v_bus, w_common=primary.w_ref - 0.001, w_base=W_BASE)
        dx = inverter_derivatives(self.params, state, primary, grid)
        assert dx[IDX["delta"]] == pytest.approx(0.001 * W_BASE)

    def test_regulator_rates_pass_through(self):
        state, primary, grid = self._operating_point()
        grid = GridInterface(grid.v_bus, grid.w_common, W_BASE, regulator_rates=(-0.1, 0.2, 0.3))
        dx = inverter_derivatives(self.params, state, primary, grid)
        assert dx[IDX["xi_s"]:] == pytest.approx([-0.1, 0.2, 0.3])

    def test_limiter_freezes_voltage_integrators(self):
        state, primary, grid = self._operating_point(p=0.8, q=0.3)
        state.v_d = 0.9
        grid = GridInterface(grid.v_bus, grid.w_common, W_BASE, i_max=0.5)
        dx, outputs = inverter_derivatives(self.params, state, primary, grid, return_outputs=True)
        assert outputs.limited
        assert np.hypot(outputs.i_dref, outputs.i_qref) <= 0.5 + 1e-12
        assert dx[IDX["phi_vd"]] == 0.0 and dx[IDX["phi_vq"]] == 0.0

    def test_non_finite_state_collapses(self):
        state, primary, grid = self._operating_point()
        x = state.as_array()
        x[IDX["v_d"]] = np.nan
        with pytest.raises(SimulationCollapse):
            inverter_derivatives(self.params, x, primary, grid)
