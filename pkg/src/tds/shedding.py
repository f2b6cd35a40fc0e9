"""
Load-shed executor driven by the V-f regulators' shed requests.

Increments are sized on the total base load, snapshotted when shedding starts, so
successive increments remove equal amounts instead of compounding.
"""
from dataclasses import dataclass
from typing import Optional

from loguru import logger

from src.tds.events import Event, EventKind
from src.utils.errors import ConfigurationError, ShedFloorReached


@dataclass(frozen=True)
class ShedPolicy:
    """
    Shed ``increment`` of the base load every ``interval`` seconds while requested.

    With ``use_request`` the first increment is at least the regulators' requested
    magnitude, their estimate of the load excess.
    """

    increment: float = 0.01
    interval: float = 0.5
    floor: float = 0.5
    use_request: bool = True
    raise_on_floor: bool = False

    def __post_init__(self):
        if not 0.0 < self.increment < 1.0:
            raise ConfigurationError(f"Shed increment must be in (0, 1), got {self.increment}")
        if self.interval <= 0:
            raise ConfigurationError("Shed interval must be positive")
        if not 0.0 <= self.floor < 1.0:
            raise ConfigurationError(f"Shed floor must be in [0, 1), got {self.floor}")


@dataclass
class ShedStatus:
    base_load: Optional[float] = None
    shed_amount: float = 0.0
    last_shed: Optional[float] = None
    floor_reported: bool = False
    total_events: int = 0

    @property
    def shed_fraction(self) -> float:
        """Cumulative shed as a fraction of the base load."""
        if not self.base_load:
            return 0.0
        return self.shed_amount / self.base_load

    @property
    def remaining(self) -> float:
        return 1.0 - self.shed_fraction


def shed_policy_executor(
    request_active: bool,
    policy: ShedPolicy,
    t: float,
    status: ShedStatus,
    total_load: float = 1.0,
    requested: float = 0.0,
) -> Optional[Event]:
    """
    Decide whether to shed at time ``t``.

    Args:
        request_active: Whether any active inverter currently requests shedding.
        policy: Increment, interval and floor.
        t: Current simulation time (s).
        status: Mutable executor state carried between calls.
        total_load: Apparent power of the load currently connected (p.u.).
        requested: Summed shed magnitude of the requesting regulators (p.u.).

    Returns:
        The SHED event to apply, with ``fraction`` relative to ``total_load``; a
        SHED_FLOOR event the first time the floor blocks a request; otherwise None.

    Raises:
        ShedFloorReached: If the floor blocks a request and ``policy.raise_on_floor`` is set.
    """
    if not request_active:
        return None
    if status.last_shed is not None and t - status.last_shed < policy.interval - 1e-12:
        return None
    if total_load <= 0:
        return None
    if status.base_load is None:
        status.base_load = total_load
        logger.info(f"Shedding started at t={t:.3f}s on a base load of {total_load:.4f} p.u.")

    amount = policy.increment * status.base_load
    if policy.use_request and status.total_events == 0:
        amount = max(amount, requested)
    if status.shed_amount + amount > (1.0 - policy.floor) * status.base_load + 1e-12:
        if policy.raise_on_floor:
            raise ShedFloorReached(f"Shed floor {policy.floor:.0%} reached at t={t:.3f}s with an active request")
        if status.floor_reported:
            return None
        status.floor_reported = True
        logger.warning(f"Shed floor {policy.floor:.0%} reached at t={t:.3f}s; request left unserved")
        return Event(time=t, kind=EventKind.SHED_FLOOR, note=f"remaining={status.remaining:.4f}")

    fraction = min(amount / total_load, 1.0 - 1e-9)
    status.shed_amount += amount
    status.last_shed = t
    status.total_events += 1
    logger.info(f"Shedding {amount:.4f} p.u. ({status.shed_fraction:.1%} of base so far) at t={t:.3f}s")
    return Event(time=t, kind=EventKind.SHED, fraction=fraction, note="executor")
