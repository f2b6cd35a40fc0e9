"""
Static network description: per-unit bases, buses, branches and the nodal admittance matrix.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from loguru import logger

from src.grid.zip_load import ZipLoadParams
from src.utils.errors import ConfigurationError


@dataclass(frozen=True)
class PerUnitBase:
    """System bases. ``v_base`` is line-to-line voltage per voltage level (V)."""

    s_base: float = 10e6
    v_base: Tuple[float, ...] = (12.47e3,)
    f_base: float = 60.0

    def __post_init__(self):
        if self.s_base <= 0 or self.f_base <= 0 or any(v <= 0 for v in self.v_base):
            raise ConfigurationError("All per-unit bases must be strictly positive")

    @property
    def w_base(self) -> float:
        """Electrical base angular frequency (rad/s)."""
        return 2.0 * np.pi * self.f_base

    def z_base(self, level: int = 0) -> float:
        return self.v_base[level] ** 2 / self.s_base


@dataclass(frozen=True)
class Bus:
    """A network bus; ``load`` and ``inverter_id`` are optional attachments."""

    id: str
    v_nominal: float = 1.0
    load: Optional[ZipLoadParams] = None
    inverter_id: Optional[str] = None
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    voltage_level: int = 0

    def __post_init__(self):
        if not 0.5 < self.v_nominal < 1.5:
            raise ConfigurationError(f"Bus {self.id}: v_nominal {self.v_nominal} outside (0.5, 1.5)")


@dataclass(frozen=True)
class Branch:
    """Series branch with admittance y = g + jb (p.u.)."""

    from_bus: str
    to_bus: str
    g: float
    b: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ConfigurationError(f"Branch {self.from_bus}-{self.to_bus} connects a bus to itself")
        if not (np.isfinite(self.g) and np.isfinite(self.b)):
            raise ConfigurationError(f"Branch {self.from_bus}-{self.to_bus} has non-finite admittance")

    @classmethod
    def from_impedance(cls, from_bus: str, to_bus: str, r: float, x: float) -> "Branch":
        z = complex(r, x)
        if z == 0:
            raise ConfigurationError(f"Branch {from_bus}-{to_bus} has zero impedance")
        y = 1.0 / z
        return cls(from_bus, to_bus, y.real, y.imag)

    @property
    def admittance(self) -> complex:
        return complex(self.g, self.b)


def build_admittance(buses: Sequence[Bus], branches: Sequence[Branch]) -> np.ndarray:
    """
    Assemble the dense nodal admittance matrix.

    Off-diagonal Y_ij = -(g + jb); the diagonal collects incident branch admittances
    plus bus shunts. A disconnected graph is reported but not rejected.
    """
    index = {bus.id: k for k, bus in enumerate(buses)}
    if len(index) != len(buses):
        raise ConfigurationError("Bus ids must be unique")

    n = len(buses)
    y = np.zeros((n, n), dtype=complex)
    graph = nx.Graph()
    graph.add_nodes_from(index)

    for branch in branches:
        for end in (branch.from_bus, branch.to_bus):
            if end not in index:
                raise ConfigurationError(f"Branch references unknown bus id: {end}")
        i, j = index[branch.from_bus], index[branch.to_bus]
        y_branch = branch.admittance
        y[i, i] += y_branch
        y[j, j] += y_branch
        y[i, j] -= y_branch
        y[j, i] -= y_branch
        graph.add_edge(branch.from_bus, branch.to_bus)

    for k, bus in enumerate(buses):
        y[k, k] += complex(bus.g_shunt, bus.b_shunt)

    if n > 1 and not nx.is_connected(graph):
        islands = [sorted(c) for c in nx.connected_components(graph)]
        logger.warning(f"Network is not connected; islands: {islands}")

    return y


@dataclass(frozen=True)
class NetworkModel:
    """Immutable network with its admittance matrix; safe to share between engines."""

    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    y_matrix: np.ndarray
    base: PerUnitBase = field(default_factory=PerUnitBase)

    @classmethod
    def build(
        cls,
        buses: Sequence[Bus],
        branches: Sequence[Branch],
        base: Optional[PerUnitBase] = None,
    ) -> "NetworkModel":
        y = build_admittance(buses, branches)
        y.setflags(write=False)
        return cls(tuple(buses), tuple(branches), y, base or PerUnitBase())

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_index(self) -> Dict[str, int]:
        return {bus.id: k for k, bus in enumerate(self.buses)}

    def bus(self, bus_id: str) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def loads(self) -> List[Optional[ZipLoadParams]]:
        return [bus.load for bus in self.buses]


def network_injections(net, v: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Polar power-flow injections for a NetworkModel (or a bare admittance matrix).

    P_i = V_i sum_j V_j (G_ij cos th_ij + B_ij sin th_ij)
    Q_i = V_i sum_j V_j (G_ij sin th_ij - B_ij cos th_ij)
    """
    y_matrix = net.y_matrix if isinstance(net, NetworkModel) else np.asarray(net)
    g = y_matrix.real
    b = y_matrix.imag
    theta_ij = theta[:, None] - theta[None, :]
    cos_t = np.cos(theta_ij)
    sin_t = np.sin(theta_ij)
    vv = v[:, None] * v[None, :]
    p = np.sum(vv * (g * cos_t + b * sin_t), axis=1)
    q = np.sum(vv * (g * sin_t - b * cos_t), axis=1)
    return p, q


def injection_jacobian(y_matrix: np.ndarray, v: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Complex partials dS/dVm and dS/dVa of the bus injections."""
    vc = v * np.exp(1j * theta)
    current = y_matrix @ vc
    v_norm = np.exp(1j * theta)
    ds_dvm = np.diag(vc) @ np.conj(y_matrix @ np.diag(v_norm)) + np.diag(np.conj(current) * v_norm)
    ds_dva = 1j * np.diag(vc) @ np.conj(np.diag(current) - y_matrix @ np.diag(vc))
    return ds_dvm, ds_dva


def branch_losses(
    buses: Sequence[Bus],
    branches: Sequence[Branch],
    v: np.ndarray,
    theta: np.ndarray,
) -> float:
    """Total active loss: sum over branches of g |dV|^2 plus shunt conductance losses."""
    index = {bus.id: k for k, bus in enumerate(buses)}
    vc = v * np.exp(1j * theta)
    loss = 0.0
    for branch in branches:
        dv = vc[index[branch.from_bus]] - vc[index[branch.to_bus]]
        loss += branch.g * abs(dv) ** 2
    for k, bus in enumerate(buses):
        loss += bus.g_shunt * v[k] ** 2
    return float(loss)
