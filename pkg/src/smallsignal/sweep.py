"""
Eigenvalue sweeps over control gains with crossing-gain bisection.
"""
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.job_queue.sweep_pool import SweepPool
from src.smallsignal.linearize import DEFAULT_STEP, eigenvalues, linearize, reduce_state_matrix
from src.tds.engine import initialize
from src.utils.errors import ConfigurationError, NumericalError

DROOP_RATIO = 5.0  # k_dv / k_df
ALLOCATION_RATIO = 0.75  # k_v / k_w
DEFAULT_POINTS = 40
DEFAULT_SPAN = (0.2, 10.0)
CROSSING_REL_TOL = 1e-4

# crossing gains reported for the full-size feeder; informational only
REFERENCE_CROSSINGS: Dict[int, Tuple[float, float]] = {
    1: (0.025, 0.125),
    2: (0.0165, 0.0825),
    3: (0.0825, 0.0619),
}


class SweepCondition(IntEnum):
    DROOP = 1
    DROOP_WITH_REGULATOR = 2
    POWER_REGULATOR = 3


@dataclass
class EigenSweepResult:
    swept_parameter: str
    grid: np.ndarray
    spectra: List[np.ndarray] = field(default_factory=list)
    crossing_gain: Optional[float] = None
    bracket: Optional[Tuple[float, float]] = None
    diagnostics: List[str] = field(default_factory=list)
    condition: Optional[int] = None

    @property
    def evaluated(self) -> np.ndarray:
        return self.grid[: len(self.spectra)]

    @property
    def max_real(self) -> np.ndarray:
        return np.array([np.max(s.real) if s.size else -np.inf for s in self.spectra])

    @property
    def truncated(self) -> bool:
        return len(self.spectra) < len(self.grid)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for value, spectrum in zip(self.evaluated, self.spectra):
            for mode, lam in enumerate(spectrum):
                rows.append({"parameter": self.swept_parameter, "value": float(value), "mode": mode,
                             "re": float(lam.real), "im": float(lam.imag)})
        return pd.DataFrame(rows, columns=["parameter", "value", "mode", "re", "im"])

    def summary(self) -> Dict[str, object]:
        return {
            "condition": self.condition,
            "swept_parameter": self.swept_parameter,
            "grid_points": int(len(self.grid)),
            "evaluated_points": int(len(self.spectra)),
            "crossing_gain": self.crossing_gain,
            "bracket": list(self.bracket) if self.bracket else None,
            "reference_crossing": list(REFERENCE_CROSSINGS.get(self.condition, ())) or None,
            "diagnostics": list(self.diagnostics),
        }


def default_grid(nominal: float, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    return np.geomspace(DEFAULT_SPAN[0] * nominal, DEFAULT_SPAN[1] * nominal, n_points)


def _max_real(spectrum: np.ndarray) -> float:
    return float(np.max(spectrum.real)) if spectrum.size else -np.inf


def sweep_spectra(
    spectrum_at: Callable[[float], np.ndarray],
    grid: Sequence[float],
    name: str = "gain",
    rel_tol: float = CROSSING_REL_TOL,
    pool: Optional[SweepPool] = None,
    max_bisections: int = 60,
) -> EigenSweepResult:
    """
    Evaluate spectra along a monotone grid and bisect the first sign change of the
    largest real part. A failing grid point truncates the sweep.

    Args:
        spectrum_at: Eigenvalues at one parameter value.
        grid: Strictly increasing parameter values.
        name: Parameter name carried into the result.
        rel_tol: Relative bracket width at which bisection stops.
        pool: Worker pool for the grid points; bisection always runs serially.
        max_bisections: Cap on bisection steps.

    Returns:
        Spectra per evaluated point, the crossing gain (upper bracket end) when the
        largest real part changes sign, and diagnostics for any truncation.

    Raises:
        ConfigurationError: If the grid is not strictly increasing.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigurationError("Sweep grid must be strictly monotone")
    result = EigenSweepResult(swept_parameter=name, grid=grid)

    if pool is not None and pool.workers > 1:
        spectra = pool.map(spectrum_at, list(grid))
        for value, spectrum in zip(grid, spectra):
            if spectrum is None:
                result.diagnostics.append(f"equilibrium lost at {name}={value:.6g}; sweep truncated")
                break
            result.spectra.append(spectrum)
    else:
        for value in grid:
            try:
                result.spectra.append(spectrum_at(float(value)))
            except NumericalError as exc:
                result.diagnostics.append(f"equilibrium lost at {name}={value:.6g}: {exc}; sweep truncated")
                break
    for message in result.diagnostics:
        logger.warning(message)

    m = result.max_real
    signs = np.sign(m)
    change = np.flatnonzero(signs[:-1] * signs[1:] < 0) if m.size > 1 else np.array([], dtype=int)
    if change.size == 0:
        logger.info(f"Sweep over {name}: no stability crossing in {len(result.spectra)} points")
        return result

    k = int(change[0])
    lo, hi = float(grid[k]), float(grid[k + 1])
    side_lo = signs[k]
    for _ in range(max_bisections):
        if abs(hi - lo) <= rel_tol * max(abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        try:
            value = _max_real(spectrum_at(mid))
        except NumericalError as exc:
            result.diagnostics.append(f"bisection stopped at {name}={mid:.6g}: {exc}")
            break
        if np.sign(value) == side_lo:
            lo = mid
        else:
            hi = mid
    result.bracket = (lo, hi)
    result.crossing_gain = hi
    logger.info(f"Sweep over {name}: crossing at {hi:.6g} (bracket [{lo:.6g}, {hi:.6g}])")
    return result


def _swept_units(inverters, condition: SweepCondition, gain: float):
    units = []
    for unit in inverters:
        if condition is SweepCondition.POWER_REGULATOR:
            power = replace(unit.power_reg, k_w=gain, k_v=ALLOCATION_RATIO * gain)
            units.append(replace(unit, power_reg=power))
        else:
            params = replace(unit.params, k_df=gain, k_dv=DROOP_RATIO * gain)
            units.append(replace(unit, params=params))
    return units


def gain_sweep(
    model,
    condition: int,
    grid: Optional[Sequence[float]] = None,
    inputs=None,
    h: float = DEFAULT_STEP,
    pool: Optional[SweepPool] = None,
    rel_tol: float = CROSSING_REL_TOL,
) -> EigenSweepResult:
    """
    Re-solve the equilibrium and re-linearize at every grid value.

    1: all droop gains, k_dv = 5 k_df, no supplementary control.
    2: as 1 with each power regulator attached at its equilibrium output.
    3: allocation gains of the attached power regulators, k_v = 0.75 k_w.

    Args:
        model: The model to sweep; use FULL fidelity to see the controller modes.
        condition: 1, 2 or 3 as above.
        grid: Gain values; defaults to ``default_grid`` around the first inverter's gain.
        inputs: Runtime inputs to start from; regulators are disabled either way.
        h: Finite-difference step of the linearization.
        pool: Worker pool; warm starts are only used when the sweep runs serially.
        rel_tol: Relative bracket width of the crossing bisection.

    Returns:
        The sweep result tagged with ``condition``.
    """
    condition = SweepCondition(condition)
    if grid is None:
        first = model.inverters[0]
        nominal = first.power_reg.k_w if condition is SweepCondition.POWER_REGULATOR else first.params.k_df
        grid = default_grid(nominal)
    name = "k_w" if condition is SweepCondition.POWER_REGULATOR else "k_df"
    base_inputs = inputs if inputs is not None else model.default_inputs()
    warm = pool is None or pool.workers == 1
    last = {"solution": None}

    def spectrum_at(gain: float) -> np.ndarray:
        units = _swept_units(model.inverters, condition, gain)
        swept = model.with_inverters(units)
        run_inputs = base_inputs.copy()
        run_inputs.power_regs = [replace(u.power_reg, enabled=False) for u in units]
        run_inputs.vf_regs = [replace(u.vf_reg, enabled=False) for u in units]
        run_inputs.power_enabled_at = [None] * len(units)
        run_inputs.vf_enabled_at = [None] * len(units)
        initial = initialize(swept, inputs=run_inputs, guess=last["solution"] if warm else None)
        if warm:
            last["solution"] = initial.equilibrium

        branch = None
        if condition is not SweepCondition.DROOP:
            s_m = initial.equilibrium.s_inv
            initial.inputs.power_regs = [
                replace(pr, enabled=True, s_ref=float(s)) for pr, s in zip(initial.inputs.power_regs, s_m)
            ]
            selection = swept.branch_selection(initial.x, initial.inputs)
            branch = replace(selection, capacity_binding=tuple([True] * len(units)))
        lin = linearize(swept, initial, h=h, branch=branch)
        return eigenvalues(reduce_state_matrix(lin))

    logger.info(f"Gain sweep condition {int(condition)} over {name}: {len(grid)} points")
    result = sweep_spectra(spectrum_at, grid, name, rel_tol, pool)
    result.condition = int(condition)
    return result
