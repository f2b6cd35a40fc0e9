"""
Equilibrium problem and solution types.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.grid.network import NetworkModel
from src.grid.topology import AugmentedNetwork, CouplingSpec
from src.grid.zip_load import LoadTable, ZipLoadParams
from src.utils.errors import ConfigurationError


class Mode(str, Enum):
    DROOP = "droop"
    CONSTRAINED = "constrained"


@dataclass(frozen=True)
class DroopUnit:
    """Static view of one inverter: droop law, setpoints, coupling and capacity."""

    inverter_id: str
    bus_id: str
    k_df: float
    k_dv: float
    p0: float = 0.0
    q0: float = 0.0
    f0: float = 1.0
    v0: float = 1.0
    r_c: float = 0.0
    x_c: float = 0.0
    supp_w: float = 0.0
    supp_v: float = 0.0
    capacity: Optional[float] = None

    def __post_init__(self):
        if self.k_df < 0 or self.k_dv < 0:
            raise ConfigurationError(f"Inverter {self.inverter_id}: droop gains must be >= 0")
        if self.capacity is not None and self.capacity <= 0:
            raise ConfigurationError(f"Inverter {self.inverter_id}: capacity must be > 0")

    @property
    def coupling(self) -> CouplingSpec:
        return CouplingSpec(self.inverter_id, self.bus_id, self.r_c, self.x_c)


@dataclass
class EquilibriumProblem:
    """
    Static operating-point problem.

    ``loads`` overrides the loads attached to the network buses. In CONSTRAINED mode
    every inverter injects S_i (cos a_i, sin a_i) with S_i from
    ``capacity_constraints`` (or the unit capacity) and a_i from ``generation_angles``.
    """

    network: NetworkModel
    inverters: Tuple[DroopUnit, ...]
    loads: Optional[Dict[str, Optional[ZipLoadParams]]] = None
    mode: Mode = Mode.DROOP
    capacity_constraints: Optional[Tuple[float, ...]] = None
    generation_angles: Optional[Tuple[float, ...]] = None
    f0: float = 1.0
    augmented: AugmentedNetwork = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.inverters = tuple(self.inverters)
        if self.capacity_constraints is not None:
            self.capacity_constraints = tuple(float(s) for s in self.capacity_constraints)
        if self.generation_angles is not None:
            self.generation_angles = tuple(float(a) for a in self.generation_angles)
        self.augmented = AugmentedNetwork(self.network, [unit.coupling for unit in self.inverters])
        if self.mode is Mode.CONSTRAINED:
            capacities = self.capacities()
            if any(s is None or s <= 0 for s in capacities):
                raise ConfigurationError("CONSTRAINED mode needs a positive capacity for every inverter")
            if self.generation_angles is None or len(self.generation_angles) != len(self.inverters):
                raise ConfigurationError("CONSTRAINED mode needs one generation angle per inverter")

    def capacities(self) -> List[Optional[float]]:
        if self.capacity_constraints is not None:
            if len(self.capacity_constraints) != len(self.inverters):
                raise ConfigurationError("One capacity constraint per inverter is required")
            return list(self.capacity_constraints)
        return [unit.capacity for unit in self.inverters]

    def bus_loads(self) -> Dict[str, Optional[ZipLoadParams]]:
        loads = self.augmented.base_bus_loads()
        if self.loads:
            loads.update(self.loads)
        return loads

    def load_table(self) -> LoadTable:
        return self.augmented.load_table(self.bus_loads())

    def total_base_load(self) -> complex:
        p, q = 0.0, 0.0
        for load in self.bus_loads().values():
            if load is not None:
                p += load.p0
                q += load.q0
        return complex(p, q)

    def load_angle(self) -> float:
        """Power-factor angle of the aggregate base load."""
        total = self.total_base_load()
        return float(np.arctan2(total.imag, total.real))

    def generation_targets(self) -> Tuple[np.ndarray, np.ndarray]:
        s = np.array(self.capacities(), dtype=float)
        alpha = np.array(self.generation_angles, dtype=float)
        return s * np.cos(alpha), s * np.sin(alpha)

    # Derived problems

    def with_load_factor(self, factor: float) -> "EquilibriumProblem":
        if factor < 0:
            raise ConfigurationError(f"Load factor must be >= 0, got {factor}")
        scaled = {bus: (load.scaled(factor) if load is not None else None)
                  for bus, load in self.bus_loads().items()}
        return replace(self, loads=scaled)

    def with_load_step(self, disturbance) -> "EquilibriumProblem":
        """
        Add a base-load step: either {bus_id: (dp, dq)} or a single (dp, dq) split over
        the loaded buses in proportion to their base apparent power.
        """
        if disturbance is None:
            return self
        loads = self.bus_loads()
        if isinstance(disturbance, Mapping):
            steps = dict(disturbance)
        else:
            dp, dq = disturbance
            weights = {bus: abs(complex(load.p0, load.q0)) for bus, load in loads.items() if load is not None}
            total = sum(weights.values())
            if total <= 0:
                raise ConfigurationError("A global load step needs at least one loaded bus")
            steps = {bus: (dp * w / total, dq * w / total) for bus, w in weights.items()}
        for bus, (dp, dq) in steps.items():
            if bus not in loads:
                raise ConfigurationError(f"Load step references unknown bus id: {bus}")
            if loads[bus] is None:
                loads[bus] = ZipLoadParams(p0=dp, q0=dq)
            else:
                loads[bus] = loads[bus].stepped(dp, dq)
        return replace(self, loads=loads)

    def constrained(
        self,
        angles: Sequence[float],
        capacities: Optional[Sequence[float]] = None,
    ) -> "EquilibriumProblem":
        return replace(
            self,
            mode=Mode.CONSTRAINED,
            generation_angles=tuple(angles),
            capacity_constraints=tuple(capacities) if capacities is not None else self.capacity_constraints,
        )

    def with_supplementary(self, supp_w: Sequence[float], supp_v: Sequence[float]) -> "EquilibriumProblem":
        units = tuple(replace(u, supp_w=float(w), supp_v=float(v))
                      for u, w, v in zip(self.inverters, supp_w, supp_v))
        return replace(self, inverters=units)

    def with_droop_gains(self, k_df: float, k_dv: float) -> "EquilibriumProblem":
        units = tuple(replace(u, k_df=k_df, k_dv=k_dv) for u in self.inverters)
        return replace(self, inverters=units)


@dataclass
class EquilibriumSolution:
    """Converged operating point on the augmented node set."""

    f: float
    v: np.ndarray
    theta: np.ndarray
    p_inv: np.ndarray
    q_inv: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray
    residual_norm: float
    iterations: int
    node_ids: List[str]
    n_bus: int
    mode: Mode = Mode.DROOP
    f0: float = 1.0

    @property
    def delta_f(self) -> float:
        return self.f - self.f0

    @property
    def bus_v(self) -> np.ndarray:
        return self.v[: self.n_bus]

    @property
    def bus_theta(self) -> np.ndarray:
        return self.theta[: self.n_bus]

    @property
    def s_inv(self) -> np.ndarray:
        return np.hypot(self.p_inv, self.q_inv)

    def as_vector(self, reference_node: int) -> np.ndarray:
        """Unknown vector [f, V, theta without reference] used for warm starts."""
        theta = np.delete(self.theta, reference_node)
        return np.concatenate(([self.f], self.v, theta))

    def summary(self) -> Dict[str, object]:
        return {
            "mode": self.mode.value,
            "f": self.f,
            "delta_f": self.delta_f,
            "v": {nid: float(v) for nid, v in zip(self.node_ids, self.v)},
            "theta": {nid: float(t) for nid, t in zip(self.node_ids, self.theta)},
            "p_inv": self.p_inv.tolist(),
            "q_inv": self.q_inv.tolist(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }
