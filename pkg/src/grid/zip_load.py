"""
Voltage- and frequency-dependent ZIP load model.

P_l = p0 (p1 V^2 + p2 V + p3) [1 + k_pf (f - f0)]
Q_l = q0 (q1 V^2 + q2 V + q3) [1 + k_qf (f - f0)]
"""
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import ConfigurationError

COMPOSITION_TOL = 1e-12


@dataclass(frozen=True)
class ZipLoadParams:
    """ZIP composition and V-f sensitivities of one load (all p.u.)."""

    p0: float
    q0: float
    p1: float = 0.0
    p2: float = 0.0
    p3: float = 1.0
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 1.0
    k_pf: float = 0.0
    k_qf: float = 0.0
    f0: float = 1.0

    def __post_init__(self):
        values = (self.p0, self.q0, self.p1, self.p2, self.p3, self.q1, self.q2,
                  self.q3, self.k_pf, self.k_qf, self.f0)
        if not all(np.isfinite(v) for v in values):
            raise ConfigurationError("ZIP load fields must be finite")
        if abs(self.p1 + self.p2 + self.p3 - 1.0) > COMPOSITION_TOL:
            raise ConfigurationError(
                f"Active ZIP fractions must sum to 1, got {self.p1 + self.p2 + self.p3!r}"
            )
        if abs(self.q1 + self.q2 + self.q3 - 1.0) > COMPOSITION_TOL:
            raise ConfigurationError(
                f"Reactive ZIP fractions must sum to 1, got {self.q1 + self.q2 + self.q3!r}"
            )

    def scaled(self, factor: float) -> "ZipLoadParams":
        """Same composition with the base powers multiplied by ``factor``."""
        return replace(self, p0=self.p0 * factor, q0=self.q0 * factor)

    def stepped(self, dp: float, dq: float) -> "ZipLoadParams":
        """Same composition with a step added to the base powers."""
        return replace(self, p0=self.p0 + dp, q0=self.q0 + dq)


def eval_zip_load(load: ZipLoadParams, v: float, f: float) -> Tuple[float, float]:
    """Evaluate the load powers at voltage ``v`` and frequency ``f`` (p.u.)."""
    p_l = load.p0 * (load.p1 * v * v + load.p2 * v + load.p3) * (1.0 + load.k_pf * (f - load.f0))
    q_l = load.q0 * (load.q1 * v * v + load.q2 * v + load.q3) * (1.0 + load.k_qf * (f - load.f0))
    return p_l, q_l


class LoadTable:
    """
    Vectorized ZIP evaluation over a node set.

    Nodes without a load carry zero base power, so every array has one entry per node.
    """

    FIELDS = ("p0", "q0", "p1", "p2", "p3", "q1", "q2", "q3", "k_pf", "k_qf", "f0")

    def __init__(self, loads: Sequence[Optional[ZipLoadParams]]):
        self.n = len(loads)
        self.loads = list(loads)
        for name in self.FIELDS:
            default = 1.0 if name in ("p3", "q3", "f0") else 0.0
            column = [getattr(load, name) if load is not None else default for load in loads]
            setattr(self, name, np.array(column, dtype=float))

    def evaluate(self, v: np.ndarray, f: float) -> Tuple[np.ndarray, np.ndarray]:
        """Per-node load powers for voltage magnitudes ``v`` and system frequency ``f``."""
        p = self.p0 * (self.p1 * v * v + self.p2 * v + self.p3) * (1.0 + self.k_pf * (f - self.f0))
        q = self.q0 * (self.q1 * v * v + self.q2 * v + self.q3) * (1.0 + self.k_qf * (f - self.f0))
        return p, q

    def sensitivities(self, v: np.ndarray, f: float) -> Dict[str, np.ndarray]:
        """
        Closed-form partial derivatives of the load powers.

        Args:
            v: Voltage magnitude per node (p.u.).
            f: System frequency (p.u.).

        Returns:
            ``dp_dv`` and ``dq_dv`` per node (each load depends on its own voltage only),
            ``dp_df`` and ``dq_df`` per node.
        """
        freq_p = 1.0 + self.k_pf * (f - self.f0)
        freq_q = 1.0 + self.k_qf * (f - self.f0)
        return {
            "dp_dv": self.p0 * (2.0 * self.p1 * v + self.p2) * freq_p,
            "dq_dv": self.q0 * (2.0 * self.q1 * v + self.q2) * freq_q,
            "dp_df": self.p0 * (self.p1 * v * v + self.p2 * v + self.p3) * self.k_pf,
            "dq_df": self.q0 * (self.q1 * v * v + self.q2 * v + self.q3) * self.k_qf,
        }

    def total_base(self) -> Tuple[float, float]:
        return float(self.p0.sum()), float(self.q0.sum())
