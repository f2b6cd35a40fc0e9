"""
Feasibility maps and minimum-shed search on the calibrated toy microgrid.
"""
import pytest

from src.equilibrium.feasibility import (
    FeasibilityMap,
    FeasibilitySample,
    min_shed_search,
    sweep_feasibility,
)
from src.job_queue.sweep_pool import SweepPool
from src.utils.errors import ConfigurationError

ANGLES = 41


def test_light_load_is_slack_and_feasible(toy_problem):
    fmap = sweep_feasibility(toy_problem, [0.5], n_angles=ANGLES)[0]
    assert not fmap.binding
    assert fmap.feasible_count == ANGLES
    # every sample reuses the droop operating point
    assert len({s.delta_f for s in fmap.samples}) == 1


def test_arc_shrinks_with_load(toy_problem):
    maps = sweep_feasibility(toy_problem, [1.0, 1.02, 1.05, 1.08], n_angles=ANGLES)
    widths = [m.arc_width() for m in maps]
    assert all(a >= b for a, b in zip(widths, widths[1:]))
    assert maps[1].feasible_count > 0
    assert maps[-1].is_empty


def test_map_frame_columns(toy_problem):
    fmap = sweep_feasibility(toy_problem, [1.02], n_angles=ANGLES)[0]
    frame = fmap.to_frame()
    assert len(frame) == ANGLES
    for column in ("load_factor", "alpha", "offset", "delta_f", "delta_v_bus_1", "feasible", "converged"):
        assert column in frame.columns
    assert frame["offset"].iloc[0] == pytest.approx(-0.2)
    assert frame["offset"].iloc[-1] == pytest.approx(0.2)


def test_parallel_sweep_matches_serial(toy_problem):
    serial = sweep_feasibility(toy_problem, [1.05], n_angles=ANGLES)[0]
    parallel = sweep_feasibility(toy_problem, [1.05], n_angles=ANGLES, pool=SweepPool(4))[0]
    assert [s.feasible for s in serial.samples] == [s.feasible for s in parallel.samples]
    assert [s.offsets for s in serial.samples] == [s.offsets for s in parallel.samples]


def test_arc_width_of_hand_built_map():
    samples = [
        FeasibilitySample((o,), (o,), 0.0, (0.0,), feasible)
        for o, feasible in [(-0.1, False), (-0.05, True), (0.0, True), (0.03, True), (0.1, False)]
    ]
    fmap = FeasibilityMap(load_factor=1.0, samples=samples)
    assert fmap.arc_width() == pytest.approx(0.08)
    assert FeasibilityMap(load_factor=1.0).arc_width() == 0.0


@pytest.mark.parametrize("kwargs", [{"n_angles": 3}, {"full_grid": True}])
def test_invalid_sweep_options(toy_problem, kwargs):
    with pytest.raises(ConfigurationError):
        sweep_feasibility(toy_problem, [1.0], **kwargs)


def test_min_shed_zero_when_feasible(toy_problem):
    assert min_shed_search(toy_problem, 1.0, n_angles=ANGLES) == 0.0


@pytest.mark.slow
def test_min_shed_matches_linear_scan(toy_problem):
    shed = min_shed_search(toy_problem, 1.08, n_angles=ANGLES)
    assert 0.0 < shed <= 0.08
    scan = next(
        k * 0.001 for k in range(0, 81)
        if not sweep_feasibility(toy_problem, [1.08 * (1 - k * 0.001)], n_angles=ANGLES)[0].is_empty
    )
    assert shed == pytest.approx(scan)


def test_raising_sample_recorded_as_not_converged(toy_problem, monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("singular Jacobian")

    monkeypatch.setattr("src.equilibrium.feasibility.solve_constrained_transition", broken)
    fmap = sweep_feasibility(toy_problem, [1.05], n_angles=ANGLES)[0]
    assert len(fmap.samples) == ANGLES
    assert fmap.feasible_count == 0
    assert not any(s.converged for s in fmap.samples)
    assert fmap.to_frame()["converged"].eq(False).all()
