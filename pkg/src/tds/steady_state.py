"""
Steady-state detection on simulation traces.
"""
from typing import Optional, Sequence

import numpy as np
import pandas as pd

DEFAULT_TOL = 1e-4


def detect_steady_state(
    trace,
    window: float,
    tol: float = DEFAULT_TOL,
    columns: Optional[Sequence[str]] = None,
) -> Optional[float]:
    """
    Earliest time after which every selected column stays within a band of width
    ``tol`` for at least ``window`` seconds up to the end of the trace. None if the
    trace never settles.
    """
    data: pd.DataFrame = getattr(trace, "data", trace)
    if data.empty:
        return None
    if columns is None:
        columns = [c for c in data.columns if c.endswith(("_s_m", "_f", "_v")) and c != "time"]
    time = data["time"].to_numpy()
    values = data[list(columns)].to_numpy(dtype=float)

    # reverse running extremes: spread of each column from row k to the end
    rev = values[::-1]
    spread = (np.maximum.accumulate(rev, axis=0) - np.minimum.accumulate(rev, axis=0))[::-1]
    settled = np.all(spread <= tol, axis=1)
    if not settled[-1]:
        return None
    unsettled = np.flatnonzero(~settled)
    k = 0 if unsettled.size == 0 else int(unsettled[-1]) + 1
    if time[-1] - time[k] < window:
        return None
    return float(time[k])
