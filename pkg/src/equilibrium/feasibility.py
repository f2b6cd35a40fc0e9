"""
Capacity-circle feasibility maps and minimum load-shed search.

For each load factor the droop equilibrium is solved first. If every inverter stays
within its capacity the constraint is slack and all samples share that operating
point. Otherwise each sample pins all inverters to their circles at a common angle
offset from the aggregate load power-factor angle.
"""
import itertools
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.equilibrium.problem import EquilibriumProblem, EquilibriumSolution, Mode
from src.equilibrium.solver import solve_constrained_transition, solve_droop_equilibrium
from src.job_queue.sweep_pool import JobStatus, SweepPool
from src.utils.errors import ConfigurationError, NumericalError

DF_MAX = 0.01
DV_MAX = 0.05
DEFAULT_WINDOW = 0.2
DEFAULT_ANGLES = 121
SHED_RESOLUTION = 0.001
CLASSIFY_TOL = 1e-12


@dataclass
class FeasibilitySample:
    offsets: Tuple[float, ...]
    alphas: Tuple[float, ...]
    delta_f: float
    delta_v: Tuple[float, ...]
    feasible: bool
    converged: bool = True


@dataclass
class FeasibilityMap:
    load_factor: float
    samples: List[FeasibilitySample] = field(default_factory=list)
    security_box: Tuple[float, float] = (DF_MAX, DV_MAX)
    binding: bool = True
    monitored_buses: Tuple[str, ...] = ()

    @property
    def feasible_count(self) -> int:
        return sum(1 for s in self.samples if s.feasible)

    @property
    def is_empty(self) -> bool:
        return self.feasible_count == 0

    def arc_width(self) -> float:
        """Spread of feasible common offsets (rad); 0 when empty or single-sample."""
        offsets = [s.offsets[0] for s in self.samples if s.feasible]
        if len(offsets) < 2:
            return 0.0
        return float(max(offsets) - min(offsets))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.samples:
            row = {"load_factor": self.load_factor, "alpha": s.alphas[0], "offset": s.offsets[0]}
            for k, a in enumerate(s.alphas):
                row[f"alpha_{k}"] = a
            row["delta_f"] = s.delta_f
            for bus, dv in zip(self.monitored_buses, s.delta_v):
                row[f"delta_v_bus_{bus}"] = dv
            row["feasible"] = s.feasible
            row["converged"] = s.converged
            rows.append(row)
        columns = ["load_factor", "alpha", "offset", "delta_f"]
        columns += [f"delta_v_bus_{b}" for b in self.monitored_buses] + ["feasible", "converged"]
        frame = pd.DataFrame(rows)
        if frame.empty:
            return pd.DataFrame(columns=columns)
        extra = [c for c in frame.columns if c not in columns]
        return frame[columns[:3] + extra + columns[3:]]


def _failed_sample(offset_set: Tuple[float, ...], beta: float, n_nodes: int) -> FeasibilitySample:
    alphas = tuple(beta + o for o in offset_set)
    return FeasibilitySample(offset_set, alphas, float("nan"), tuple([float("nan")] * n_nodes), False, converged=False)


def _classify(delta_f: float, delta_v: Sequence[float], df_max: float, dv_max: float) -> bool:
    return abs(delta_f) <= df_max + CLASSIFY_TOL and all(abs(dv) <= dv_max + CLASSIFY_TOL for dv in delta_v)


def _deviations(problem: EquilibriumProblem, solution: EquilibriumSolution, nodes: np.ndarray):
    nominal = np.array([problem.network.buses[k].v_nominal for k in nodes])
    return solution.delta_f, tuple(float(x) for x in solution.v[nodes] - nominal)


def _offset_grid(n_angles: int, window: float) -> np.ndarray:
    if n_angles == 1:
        return np.array([0.0])
    if n_angles < 8:
        raise ConfigurationError(f"n_angles must be 1 or >= 8, got {n_angles}")
    return np.linspace(-window, window, n_angles)


def _monitored_nodes(problem: EquilibriumProblem, monitored_buses: Optional[Sequence[str]]):
    if monitored_buses is None:
        nodes = list(dict.fromkeys(int(k) for k in problem.augmented.monitored_bus_nodes()))
    else:
        nodes = [problem.augmented.bus_node(b) for b in monitored_buses]
    ids = tuple(problem.network.buses[k].id for k in nodes)
    return np.array(nodes, dtype=int), ids


def is_capacity_binding(problem: EquilibriumProblem, solution: EquilibriumSolution) -> bool:
    capacities = np.array(problem.capacities(), dtype=float)
    return bool(np.any(solution.s_inv > capacities * (1.0 + 1e-9)))


def sweep_feasibility(
    problem: EquilibriumProblem,
    load_factors: Sequence[float],
    n_angles: int = DEFAULT_ANGLES,
    window: float = DEFAULT_WINDOW,
    df_max: float = DF_MAX,
    dv_max: float = DV_MAX,
    monitored_buses: Optional[Sequence[str]] = None,
    full_grid: bool = False,
    pool: Optional[SweepPool] = None,
) -> List[FeasibilityMap]:
    """
    One FeasibilityMap per load factor.

    Args:
        problem: The base problem; its capacities define the constraint circles.
        load_factors: Uniform load multipliers to map.
        n_angles: Offsets sampled per inverter.
        window: Half-width of the offset window around each inverter's load angle (rad).
        df_max: Frequency band half-width (p.u.).
        dv_max: Voltage band half-width (p.u.).
        monitored_buses: Buses whose voltages are classified; defaults to every bus.
        full_grid: Sample every combination of per-inverter offsets (N <= 2 only).
        pool: Worker pool for the samples; serial when omitted.

    Returns:
        The maps in ``load_factors`` order. Samples that fail to solve are kept as
        not converged rather than dropped.
    """
    if any(s is None for s in problem.capacities()):
        raise ConfigurationError("Feasibility sweeps need a capacity for every inverter")
    if full_grid and len(problem.inverters) > 2:
        raise ConfigurationError("full_grid sampling is limited to two inverters")
    base = replace(problem, mode=Mode.DROOP, generation_angles=None)
    pool = pool or SweepPool(name="feasibility")
    nodes, bus_ids = _monitored_nodes(base, monitored_buses)
    offsets = _offset_grid(n_angles, window)
    n_inv = len(base.inverters)
    if full_grid:
        offset_sets = [tuple(c) for c in itertools.product(offsets, repeat=n_inv)]
    else:
        offset_sets = [tuple([o] * n_inv) for o in offsets]

    maps = []
    for lf in load_factors:
        scaled = base.with_load_factor(lf)
        try:
            droop = solve_droop_equilibrium(scaled)
        except NumericalError as exc:
            logger.warning(f"Load factor {lf:.3f}: droop equilibrium failed ({exc}); treating capacity as binding")
            droop = None
        beta = scaled.load_angle()
        fmap = FeasibilityMap(load_factor=lf, security_box=(df_max, dv_max), monitored_buses=bus_ids)

        if droop is not None and not is_capacity_binding(scaled, droop):
            d_f, d_v = _deviations(scaled, droop, nodes)
            ok = _classify(d_f, d_v, df_max, dv_max)
            fmap.binding = False
            fmap.samples = [
                FeasibilitySample(o, tuple(beta + x for x in o), d_f, d_v, ok) for o in offset_sets
            ]
            logger.info(f"Load factor {lf:.3f}: capacity slack, {fmap.feasible_count}/{len(offset_sets)} feasible")
            maps.append(fmap)
            continue

        def evaluate(offset_set, scaled=scaled, droop=droop, beta=beta):
            alphas = tuple(beta + o for o in offset_set)
            try:
                sol = solve_constrained_transition(scaled.constrained(alphas), initial=droop)
            except NumericalError as exc:
                logger.warning(f"Load factor {lf:.3f}, angles {alphas}: no solution ({exc})")
                return _failed_sample(offset_set, beta, len(nodes))
            d_f, d_v = _deviations(scaled, sol, nodes)
            return FeasibilitySample(offset_set, alphas, d_f, d_v, _classify(d_f, d_v, df_max, dv_max))

        report = pool.run(evaluate, offset_sets)
        fmap.samples = [
            job.result if job.status is JobStatus.COMPLETED else _failed_sample(job.payload, beta, len(nodes))
            for job in report.jobs
        ]
        failed = report.stats()[JobStatus.FAILED.value]
        if failed:
            logger.error(f"Load factor {lf:.3f}: {failed} samples raised and are recorded as not converged")
        logger.info(f"Load factor {lf:.3f}: {fmap.feasible_count}/{len(offset_sets)} feasible, "
                    f"arc width {fmap.arc_width():.4f} rad")
        maps.append(fmap)
    return maps


def min_shed_search(
    problem: EquilibriumProblem,
    load_factor: float,
    resolution: float = SHED_RESOLUTION,
    **sweep_kwargs,
) -> float:
    """
    Smallest uniform shed fraction (multiple of ``resolution``) that leaves a feasible sample.

    Bisection over integer steps; the upper bracket is the shed that returns the load
    to total capacity, falling back to shedding everything.
    """
    steps = int(round(1.0 / resolution))

    def feasible(k: int) -> bool:
        lf = load_factor * (1.0 - k * resolution)
        return not sweep_feasibility(problem, [lf], **sweep_kwargs)[0].is_empty

    if feasible(0):
        return 0.0

    capacity = float(np.sum(problem.capacities()))
    load = abs(problem.total_base_load()) * load_factor
    candidates = []
    if load > capacity > 0:
        candidates.append(min(steps, int(np.ceil((1.0 - capacity / load) / resolution - 1e-9))))
    candidates.append(steps)

    hi = next((k for k in candidates if k > 0 and feasible(k)), None)
    if hi is None:
        raise ConfigurationError(f"No feasible operating point even after shedding all load at factor {load_factor}")

    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    shed = hi * resolution
    logger.info(f"Minimum shed at load factor {load_factor:.3f}: {shed:.3%}")
    return shed
