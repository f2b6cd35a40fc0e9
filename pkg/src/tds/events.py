"""
Scheduled and engine-generated simulation events.
"""
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional

from src.utils.errors import ConfigurationError


class EventKind(str, Enum):
    LOAD_STEP = "load_step"
    SET_CAPACITY = "set_capacity"
    ENABLE_POWER_REG = "enable_power_reg"
    ENABLE_VF_REG = "enable_vf_reg"
    SHED = "shed"
    ENABLE_CURRENT_LIMITER = "enable_current_limiter"
    # emitted by the engine only
    SHED_REQUEST = "shed_request"
    SHED_FLOOR = "shed_floor"
    TRIP = "trip"
    COLLAPSE = "collapse"


SCHEDULABLE = {
    EventKind.LOAD_STEP,
    EventKind.SET_CAPACITY,
    EventKind.ENABLE_POWER_REG,
    EventKind.ENABLE_VF_REG,
    EventKind.SHED,
    EventKind.ENABLE_CURRENT_LIMITER,
}


@dataclass(frozen=True)
class Event:
    """
    One event. ``inverter=None`` on an inverter event targets every inverter;
    ``bus=None`` on SHED sheds all loads uniformly.
    """

    time: float
    kind: EventKind
    bus: Optional[str] = None
    inverter: Optional[str] = None
    dp: float = 0.0
    dq: float = 0.0
    s_ref: Optional[float] = None
    fraction: float = 0.0
    i_max: Optional[float] = None
    priority: bool = True
    ramp_s: float = 0.0
    note: str = ""

    def __post_init__(self):
        if self.time < 0:
            raise ConfigurationError(f"Event time must be >= 0, got {self.time}")
        if self.kind is EventKind.LOAD_STEP and self.bus is None:
            raise ConfigurationError("LOAD_STEP needs a bus")
        if self.kind is EventKind.SET_CAPACITY and (self.s_ref is None or self.s_ref <= 0):
            raise ConfigurationError("SET_CAPACITY needs a positive s_ref")
        if self.kind is EventKind.SHED and not 0.0 < self.fraction < 1.0:
            raise ConfigurationError(f"SHED fraction must be in (0, 1), got {self.fraction}")
        if self.kind is EventKind.ENABLE_CURRENT_LIMITER and self.i_max is not None and self.i_max <= 0:
            raise ConfigurationError("Current limiter i_max must be positive")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return {k: v for k, v in data.items() if v not in (None, "") or k in ("time", "kind")}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Event":
        payload = dict(data)
        payload["kind"] = EventKind(payload["kind"])
        return cls(**payload)


def sort_events(events: Iterable[Event], t_end: float) -> List[Event]:
    """Stable time ordering; every scheduled event must fall in [0, t_end]."""
    ordered = sorted(events, key=lambda e: e.time)
    for event in ordered:
        if event.kind not in SCHEDULABLE:
            raise ConfigurationError(f"Event kind {event.kind.value} cannot be scheduled")
        if event.time > t_end:
            raise ConfigurationError(f"Event at t={event.time} lies beyond t_end={t_end}")
    return ordered
