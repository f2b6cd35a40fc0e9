"""
Grid-forming inverter parameters and per-inverter state layout.
"""
from dataclasses import astuple, dataclass, fields
from typing import Tuple

import numpy as np

from src.grid.network import PerUnitBase
from src.utils.errors import ConfigurationError

# Order of the 17 per-inverter states of the full-fidelity model.
STATE_NAMES: Tuple[str, ...] = (
    "delta",
    "phi_id", "phi_iq",
    "phi_vd", "phi_vq",
    "i_d", "i_q",
    "v_d", "v_q",
    "i_gd", "i_gq",
    "p_m", "q_m", "f_m",
    "xi_s", "xi_f", "xi_v",
)
N_STATES = len(STATE_NAMES)
IDX = {name: k for k, name in enumerate(STATE_NAMES)}


@dataclass(frozen=True)
class InverterParams:
    """
    Filter, control and droop parameters of one inverter (p.u. on the system base).

    Droop, filter and integral gains follow the G1 column of the published
    control-parameter table, with the filter given in p.u. The proportional gains kp_i
    and kp_v are per-unit values for a plant scaled by w_base; the table's values leave
    the full-fidelity droop modes in the right half-plane.
    """

    l_f: float = 0.05
    c_f: float = 0.05
    r_f: float = 0.005
    kp_i: float = 2.0
    ki_i: float = 2.0
    kp_v: float = 1.0
    ki_v: float = 1.0
    k_df: float = 0.01
    k_dv: float = 0.05
    p0: float = 0.0
    q0: float = 0.0
    w0: float = 1.0
    v0: float = 1.0
    s_rated: float = 1.0
    pm_filter_cutoff: float = 31.4
    r_c: float = 0.005
    l_c: float = 0.05

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if not np.isfinite(value):
                raise ConfigurationError(f"Inverter parameter {item.name} must be finite")
        for name in ("kp_i", "ki_i", "kp_v", "ki_v", "r_f", "r_c", "l_c"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"Inverter parameter {name} must be >= 0, got {getattr(self, name)}")
        for name in ("k_df", "k_dv", "s_rated", "l_f", "c_f", "pm_filter_cutoff", "w0", "v0"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"Inverter parameter {name} must be > 0, got {getattr(self, name)}")

    @property
    def has_coupling(self) -> bool:
        return self.r_c != 0.0 or self.l_c != 0.0


@dataclass
class InverterState:
    """Named view of one inverter's 17 states."""

    delta: float = 0.0
    phi_id: float = 0.0
    phi_iq: float = 0.0
    phi_vd: float = 0.0
    phi_vq: float = 0.0
    i_d: float = 0.0
    i_q: float = 0.0
    v_d: float = 1.0
    v_q: float = 0.0
    i_gd: float = 0.0
    i_gq: float = 0.0
    p_m: float = 0.0
    q_m: float = 0.0
    f_m: float = 1.0
    xi_s: float = 0.0
    xi_f: float = 0.0
    xi_v: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x: np.ndarray) -> "InverterState":
        if len(x) != N_STATES:
            raise ValueError(f"Expected {N_STATES} inverter states, got {len(x)}")
        return cls(*(float(v) for v in x))

    @property
    def s_m(self) -> float:
        return float(np.hypot(self.p_m, self.q_m))


@dataclass(frozen=True)
class PrimarySignals:
    """Droop commands: angular frequency and voltage magnitude (p.u.)."""

    w_ref: float
    v_ref: float


def inductance_to_pu(henry: float, base: PerUnitBase, level: int = 0) -> float:
    """Series inductance (H) to p.u. reactance at base frequency."""
    return henry * base.w_base / base.z_base(level)


def capacitance_to_pu(farad: float, base: PerUnitBase, level: int = 0) -> float:
    """Shunt capacitance (F) to p.u. susceptance at base frequency."""
    return farad * base.w_base * base.z_base(level)
