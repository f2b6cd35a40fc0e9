"""
Node set shared by the equilibrium solver and both time-domain fidelities.

Every inverter with a non-zero coupling impedance gets an internal terminal node
behind its coupling branch. Inverters without coupling sit directly on their bus.
Buses keep their indices; terminal nodes are appended after them.
"""
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.grid.network import Branch, Bus, NetworkModel, branch_losses, build_admittance
from src.grid.zip_load import LoadTable, ZipLoadParams
from src.utils.errors import ConfigurationError


@dataclass(frozen=True)
class CouplingSpec:
    """Where an inverter connects and through which series impedance (p.u.)."""

    inverter_id: str
    bus_id: str
    r_c: float = 0.0
    x_c: float = 0.0

    @property
    def is_direct(self) -> bool:
        return self.r_c == 0.0 and self.x_c == 0.0

    @property
    def admittance(self) -> complex:
        if self.is_direct:
            return 0j
        return 1.0 / complex(self.r_c, self.x_c)


class AugmentedNetwork:
    """Network buses plus inverter terminal nodes with the matching admittance matrix."""

    def __init__(self, network: NetworkModel, couplings: Sequence[CouplingSpec]):
        if not couplings:
            raise ConfigurationError("At least one grid-forming inverter is required")

        self.network = network
        self.couplings = tuple(couplings)
        bus_index = network.bus_index

        ids = [c.inverter_id for c in couplings]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"Duplicate inverter ids: {ids}")

        direct_buses = [c.bus_id for c in couplings if c.is_direct]
        if len(set(direct_buses)) != len(direct_buses):
            raise ConfigurationError("Two directly connected inverters share one bus")

        extra_nodes: List[Bus] = []
        extra_branches: List[Branch] = []
        inverter_node: List[int] = []
        inverter_bus_node: List[int] = []

        for coupling in couplings:
            if coupling.bus_id not in bus_index:
                raise ConfigurationError(
                    f"Inverter {coupling.inverter_id} references unknown bus id: {coupling.bus_id}"
                )
            inverter_bus_node.append(bus_index[coupling.bus_id])
            if coupling.is_direct:
                inverter_node.append(bus_index[coupling.bus_id])
                continue
            terminal = Bus(id=f"{coupling.inverter_id}:terminal", inverter_id=coupling.inverter_id)
            y_c = coupling.admittance
            extra_branches.append(Branch(terminal.id, coupling.bus_id, y_c.real, y_c.imag))
            inverter_node.append(network.n_bus + len(extra_nodes))
            extra_nodes.append(terminal)

        self.nodes: Tuple[Bus, ...] = tuple(network.buses) + tuple(extra_nodes)
        self.branches: Tuple[Branch, ...] = tuple(network.branches) + tuple(extra_branches)
        self.y_matrix = build_admittance(self.nodes, self.branches)
        self.y_matrix.setflags(write=False)
        self.inverter_ids: Tuple[str, ...] = tuple(ids)
        self.inverter_node = np.array(inverter_node, dtype=int)
        self.inverter_bus_node = np.array(inverter_bus_node, dtype=int)
        self.coupling_admittance = np.array([c.admittance for c in couplings], dtype=complex)

        logger.debug(
            f"Augmented network: {network.n_bus} buses, {len(extra_nodes)} terminal nodes, "
            f"{len(couplings)} inverters"
        )

    @property
    def n_node(self) -> int:
        return len(self.nodes)

    @property
    def n_inverter(self) -> int:
        return len(self.inverter_ids)

    @property
    def reference_node(self) -> int:
        """Node of the first inverter; its angle is the common reference."""
        return int(self.inverter_node[0])

    @property
    def node_ids(self) -> List[str]:
        return [node.id for node in self.nodes]

    def bus_node(self, bus_id: str) -> int:
        return self.network.bus_index[bus_id]

    def inverter_index(self, inverter_id: str) -> int:
        try:
            return self.inverter_ids.index(inverter_id)
        except ValueError as exc:
            raise ConfigurationError(f"Unknown inverter id: {inverter_id}") from exc

    def base_bus_loads(self) -> Dict[str, Optional[ZipLoadParams]]:
        return {bus.id: bus.load for bus in self.network.buses}

    def load_table(self, bus_loads: Optional[Mapping[str, Optional[ZipLoadParams]]] = None) -> LoadTable:
        """LoadTable over all nodes; terminal nodes never carry load."""
        loads = dict(self.base_bus_loads())
        if bus_loads is not None:
            for bus_id, load in bus_loads.items():
                if bus_id not in loads:
                    raise ConfigurationError(f"Load references unknown bus id: {bus_id}")
                loads[bus_id] = load
        per_node: List[Optional[ZipLoadParams]] = [loads[bus.id] for bus in self.network.buses]
        per_node.extend([None] * (self.n_node - self.network.n_bus))
        return LoadTable(per_node)

    def node_currents(
        self,
        v: np.ndarray,
        theta: np.ndarray,
        loads: LoadTable,
        f: float,
    ) -> np.ndarray:
        """
        Complex current each node injects into the rest of the system.

        For a source node this is the current its inverter must supply: network
        injection plus the current drawn by the local load.
        """
        vc = v * np.exp(1j * theta)
        p_l, q_l = loads.evaluate(v, f)
        return self.y_matrix @ vc + np.conj((p_l + 1j * q_l) / vc)

    def losses(self, v: np.ndarray, theta: np.ndarray) -> float:
        return branch_losses(self.nodes, self.branches, v, theta)

    def monitored_bus_nodes(self) -> np.ndarray:
        """Buses hosting an inverter, in inverter order."""
        return self.inverter_bus_node.copy()
