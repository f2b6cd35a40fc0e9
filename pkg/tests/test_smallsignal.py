"""
Linearization, Schur reduction, modal analysis and gain sweeps.
"""
import numpy as np
import pytest

from src.smallsignal.linearize import (
    LinearizedModel,
    eigenvalues,
    linearize,
    linearize_dae,
    modal_table,
    pair_spectra,
    reduce_state_matrix,
    ringdown_modes,
    small_signal_stable,
)
from src.smallsignal.sweep import EigenSweepResult, SweepCondition, default_grid, gain_sweep, sweep_spectra
from src.tds.engine import InitialCondition, SimConfig, initialize, simulate
from src.tds.model import Fidelity
from src.utils.errors import ConfigurationError, NonConvergence, SingularAlgebraicBlock


def _model(f_x, f_y, g_x, g_y):
    return LinearizedModel(*(np.asarray(m, dtype=float) for m in (f_x, f_y, g_x, g_y)))


class TestLinearizeDae:
    def test_matches_analytic_jacobians(self):
        def f(x, y):
            return np.array([x[1] * y[0], -x[0] + y[0] ** 2])

        def g(x, y):
            return np.array([y[0] - x[0] - 0.5 * x[1] ** 2])

        x0, y0 = np.array([0.3, -1.2]), np.array([0.6])
        lin = linearize_dae(f, g, x0, y0, h=1e-6)
        assert lin.f_x == pytest.approx(np.array([[0.0, 0.6], [-1.0, 0.0]]), abs=1e-8)
        assert lin.f_y == pytest.approx(np.array([[-1.2], [1.2]]), abs=1e-8)
        assert lin.g_x == pytest.approx(np.array([[-1.0, 1.2]]), abs=1e-8)
        assert lin.g_y == pytest.approx(np.array([[1.0]]), abs=1e-8)

    def test_series_rlc_eigenvalues(self):
        r, l, c = 0.1, 0.05, 0.2

        def f(x, y):
            i, v = x
            return np.array([(-r * i - v) / l, i / c])

        lin = linearize_dae(f, lambda x, y: np.zeros(0), np.zeros(2), np.zeros(0))
        values = eigenvalues(reduce_state_matrix(lin))
        sigma = -r / (2 * l)
        omega = np.sqrt(1 / (l * c) - sigma ** 2)
        assert values == pytest.approx(np.array([sigma + 1j * omega, sigma - 1j * omega]), rel=1e-6)


class TestSchurReduction:
    def test_identity(self, rng):
        f_x, f_y = rng.standard_normal((4, 4)), rng.standard_normal((4, 3))
        g_x, g_y = rng.standard_normal((3, 4)), rng.standard_normal((3, 3)) + 3 * np.eye(3)
        a = reduce_state_matrix(_model(f_x, f_y, g_x, g_y))
        assert a == pytest.approx(f_x - f_y @ np.linalg.solve(g_y, g_x))

    def test_no_coupling_through_algebraic_block(self, rng):
        f_x, g_x = rng.standard_normal((3, 3)), rng.standard_normal((2, 3))
        a = reduce_state_matrix(_model(f_x, np.zeros((3, 2)), g_x, rng.standard_normal((2, 2)) + 2 * np.eye(2)))
        assert a == pytest.approx(f_x)

    def test_identity_algebraic_block(self, rng):
        f_x, f_y, g_x = rng.standard_normal((3, 3)), rng.standard_normal((3, 2)), rng.standard_normal((2, 3))
        a = reduce_state_matrix(_model(f_x, f_y, g_x, np.eye(2)))
        assert a == pytest.approx(f_x - f_y @ g_x)

    def test_singular_block_reports_null_vector(self):
        g_y = np.array([[1.0, 2.0], [2.0, 4.0]])
        lin = _model(np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((2, 1)), g_y)
        with pytest.raises(SingularAlgebraicBlock) as info:
            reduce_state_matrix(lin)
        null = info.value.null_vector
        assert np.linalg.norm(g_y @ null) < 1e-10
        assert np.linalg.norm(null) == pytest.approx(1.0)

    def test_inconsistent_blocks_rejected(self):
        with pytest.raises(ConfigurationError):
            _model(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((2, 2)), np.zeros((1, 1)))


def test_frozen_states_dropped():
    f_x = np.array([[-1.0, 0.0, 0.5], [0.0, 0.0, 0.0], [0.2, 0.0, -2.0]])
    lin = LinearizedModel(f_x, np.zeros((3, 0)), np.zeros((0, 3)), np.zeros((0, 0)), ["a", "held", "c"])
    assert list(lin.frozen_states()) == [1]
    reduced = lin.without_frozen()
    assert reduced.state_labels == ["a", "c"]
    assert reduced.f_x == pytest.approx(np.array([[-1.0, 0.5], [0.2, -2.0]]))


class TestSpectra:
    def test_diagonal_sorted_by_real_part(self):
        values = eigenvalues(np.diag([-3.0, 0.5, -1.0]))
        assert values.real == pytest.approx([0.5, -1.0, -3.0])
        assert not small_signal_stable(values)

    def test_rotation_pair(self):
        values = eigenvalues(np.array([[-0.1, 2.0], [-2.0, -0.1]]))
        assert values == pytest.approx(np.array([-0.1 + 2.0j, -0.1 - 2.0j]))
        assert small_signal_stable(values)

    def test_non_finite_matrix_rejected(self):
        with pytest.raises(ConfigurationError):
            eigenvalues(np.array([[np.nan]]))

    def test_modal_table(self):
        table = modal_table(np.array([-1.0 + 2.0j, -5.0 + 0.0j]), labels=["swing", "filter"])
        first = table.iloc[0]
        assert first["label"] == "swing"
        assert first["damping_ratio"] == pytest.approx(1 / np.sqrt(5))
        assert first["natural_frequency"] == pytest.approx(np.sqrt(5) / (2 * np.pi))
        assert first["time_constant"] == pytest.approx(1.0)
        assert table.iloc[1]["time_constant"] == pytest.approx(0.2)

    def test_pair_spectra(self):
        reference = np.array([-1 + 2j, -1 - 2j, -10])
        candidate = np.array([-10.1, -1 - 2j, -1 + 2.02j])
        pairs, errors = pair_spectra(reference, candidate)
        assert pairs == [(0, 2), (1, 1), (2, 0)]
        assert errors == pytest.approx([0.02 / np.sqrt(5), 0.0, 0.01])


class TestRingdown:
    def test_recovers_damped_modes(self):
        dt = 0.01
        t = np.arange(400) * dt
        signal = np.exp(-0.5 * t) * np.cos(2 * np.pi * t) + 0.5 * np.exp(-2.0 * t)
        modes = ringdown_modes(signal, dt, n_modes=3)
        expected = np.array([-0.5 + 2j * np.pi, -0.5 - 2j * np.pi, -2.0])
        _, errors = pair_spectra(expected, modes)
        assert np.max(errors) < 1e-6

    def test_rank_detection(self):
        dt = 0.005
        t = np.arange(300) * dt
        modes = ringdown_modes(np.exp(-3.0 * t), dt)
        assert len(modes) == 1
        assert modes[0] == pytest.approx(-3.0, rel=1e-6)

    def test_too_short(self):
        with pytest.raises(ConfigurationError):
            ringdown_modes(np.ones(3), 0.1)


class TestSweepSpectra:
    @staticmethod
    def spectrum(g):
        return np.array([g - 1.5 + 0.3j, g - 1.5 - 0.3j, -4.0 + 0j])

    def test_crossing_bisected(self):
        result = sweep_spectra(self.spectrum, np.linspace(0.2, 3.0, 15), "gain", rel_tol=1e-4)
        assert result.crossing_gain == pytest.approx(1.5, rel=1e-4)
        lo, hi = result.bracket
        assert lo < 1.5 <= hi
        assert not result.truncated
        frame = result.to_frame()
        assert list(frame.columns) == ["parameter", "value", "mode", "re", "im"]
        assert len(frame) == 15 * 3

    def test_no_crossing(self):
        result = sweep_spectra(lambda g: np.array([-g]), [0.5, 1.0, 2.0])
        assert result.crossing_gain is None
        assert result.max_real == pytest.approx([-0.5, -1.0, -2.0])

    def test_failure_truncates(self):
        def spectrum(g):
            if g > 2.0:
                raise NonConvergence("lost")
            return self.spectrum(g)

        result = sweep_spectra(spectrum, np.linspace(0.2, 3.0, 15))
        assert result.truncated
        assert len(result.spectra) == int(np.sum(np.linspace(0.2, 3.0, 15) <= 2.0))
        assert result.diagnostics
        assert result.summary()["crossing_gain"] == pytest.approx(1.5, rel=1e-3)

    def test_grid_must_be_monotone(self):
        with pytest.raises(ConfigurationError):
            sweep_spectra(self.spectrum, [1.0, 0.5, 2.0])

    def test_default_grid_spans_nominal(self):
        grid = default_grid(0.01, 40)
        assert grid[0] == pytest.approx(0.002)
        assert grid[-1] == pytest.approx(0.1)
        assert len(grid) == 40


class TestToySpectrum:
    def test_nominal_toy_is_stable(self, toy_model):
        initial = initialize(toy_model)
        lin = linearize(toy_model, initial)
        # reference angle, disabled power-regulator and V-f integrators are held
        assert lin.n_states == 14
        assert "invG1_delta" not in lin.state_labels
        values = eigenvalues(reduce_state_matrix(lin))
        assert small_signal_stable(values)

    def test_linearization_keeps_frozen_states_on_request(self, toy_model):
        initial = initialize(toy_model)
        lin = linearize(toy_model, initial, drop_frozen=False)
        assert lin.n_states == 24
        assert len(lin.frozen_states()) == 10

    def test_sweep_uses_warm_starts(self, toy_model):
        result = gain_sweep(toy_model, SweepCondition.DROOP, grid=[0.005, 0.01])
        assert isinstance(result, EigenSweepResult)
        assert len(result.spectra) == 2
        assert result.condition == 1
        assert result.swept_parameter == "k_df"

    def test_full_toy_is_stable(self, toy_scenario):
        model = toy_scenario.model(Fidelity.FULL.value)
        values = eigenvalues(reduce_state_matrix(linearize(model, initialize(model))))
        assert small_signal_stable(values)

    def test_full_feeder_is_stable(self, banshee_scenario):
        model = banshee_scenario.model(Fidelity.FULL.value)
        values = eigenvalues(reduce_state_matrix(linearize(model, initialize(model))))
        assert np.max(values.real) < -0.5

    @pytest.mark.slow
    def test_attached_regulator_lowers_the_crossing_gain(self, toy_scenario):
        model = toy_scenario.model(Fidelity.FULL.value)
        grid = np.linspace(0.034, 0.044, 6)
        droop_only = gain_sweep(model, SweepCondition.DROOP, grid=grid)
        with_regulator = gain_sweep(model, SweepCondition.DROOP_WITH_REGULATOR, grid=grid)
        assert droop_only.crossing_gain == pytest.approx(0.0392, rel=0.02)
        assert with_regulator.crossing_gain is not None
        assert grid[0] < with_regulator.crossing_gain < droop_only.crossing_gain

    @pytest.mark.slow
    def test_ringdown_matches_dominant_eigenvalue(self, toy_model):
        initial = initialize(toy_model)
        values = eigenvalues(reduce_state_matrix(linearize(toy_model, initial)))
        config = SimConfig(t_end=3.0, dt=1e-3, output_rate_hz=1000.0, trip_enabled=False)
        k = toy_model.state_index(0, "p_m")
        kicked_x = initial.x.copy()
        kicked_x[k] += 1e-4
        kicked = InitialCondition(initial.model, kicked_x, initial.y.copy(), initial.inputs.copy(),
                                  initial.equilibrium, initial.derivative_norm)
        base = simulate(toy_model, config, (), initial)
        free = simulate(toy_model, config, (), kicked)
        columns = [c for c in base.data.columns if c.endswith(("_p", "_q", "_w_ref"))]
        deviation = (free.data[columns] - base.data[columns]).to_numpy()
        # skip the fast network transient
        modes = ringdown_modes(deviation[200:], 1e-3, rank_tol=1e-5)
        dominant = values[0]
        assert np.min(np.abs(modes - dominant)) / abs(dominant) < 0.05
