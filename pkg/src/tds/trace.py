"""
Simulation trace: one row per output sample plus the event log.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.tds.events import Event

INVERTER_FIELDS = (
    "p", "q", "s", "s_m", "s_ref", "v", "f", "w_ref", "delta",
    "e_s", "e_f", "e_v", "state_f", "state_v", "dw1", "dv1", "dw2", "dv2",
)


def inverter_column(inverter_id: str, name: str) -> str:
    return f"inv{inverter_id}_{name}"


def bus_column(bus_id: str, name: str) -> str:
    return f"bus{bus_id}_{name}"


@dataclass
class SimTrace:
    data: pd.DataFrame
    events: List[Event] = field(default_factory=list)
    fidelity: str = "reduced"
    completed: bool = True
    failure: Optional[str] = None

    @property
    def time(self) -> np.ndarray:
        return self.data["time"].to_numpy()

    @property
    def inverter_ids(self) -> List[str]:
        ids = []
        for column in self.data.columns:
            if column.startswith("inv") and column.endswith("_s_m"):
                ids.append(column[3:-4])
        return ids

    def inverter(self, inverter_id: str, name: str) -> pd.Series:
        return self.data[inverter_column(inverter_id, name)]

    def bus(self, bus_id: str, name: str = "v") -> pd.Series:
        return self.data[bus_column(bus_id, name)]

    def at(self, t: float) -> pd.Series:
        """Row closest to ``t``."""
        k = int(np.argmin(np.abs(self.time - t)))
        return self.data.iloc[k]

    def window(self, t_start: float, t_end: float) -> pd.DataFrame:
        mask = (self.data["time"] >= t_start) & (self.data["time"] <= t_end)
        return self.data.loc[mask]

    def events_of(self, kind) -> List[Event]:
        return [e for e in self.events if e.kind == kind]

    def event_records(self) -> List[Dict]:
        return [e.to_dict() for e in self.events]


class TraceRecorder:
    """Collects decimated rows and turns them into a SimTrace."""

    def __init__(self, inverter_ids: List[str], bus_ids: List[str]):
        self.inverter_ids = list(inverter_ids)
        self.bus_ids = list(bus_ids)
        self.rows: List[Dict[str, float]] = []

    def record(self, row: Dict[str, float]):
        self.rows.append(row)

    def columns(self) -> List[str]:
        cols = ["time"]
        for inv in self.inverter_ids:
            cols += [inverter_column(inv, name) for name in INVERTER_FIELDS]
        for bus in self.bus_ids:
            cols += [bus_column(bus, "v"), bus_column(bus, "theta")]
        cols.append("balance_residual")
        return cols

    def build(self, events: List[Event], fidelity: str, completed: bool = True,
              failure: Optional[str] = None) -> SimTrace:
        frame = pd.DataFrame(self.rows, columns=self.columns())
        return SimTrace(frame, sorted(events, key=lambda e: e.time), fidelity, completed, failure)
