"""
Plot-ready tables in tidy long format: one CSV per panel with columns (series, x, y).

Layouts:
  fig6-style  feasibility scatter of (dV at the first monitored bus, df) plus the security rectangle
  fig7-style  eigenvalue locus over the swept gain plus the max-real-part curve
  fig9-style  dynamic inverter output, static output points against capacity circles, V-f traces
"""
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.equilibrium.feasibility import DF_MAX, DV_MAX, FeasibilityMap
from src.output.writers import PathLike, artifact_path
from src.smallsignal.sweep import EigenSweepResult
from src.tds.trace import SimTrace, inverter_column
from src.utils.errors import ConfigurationError

COLUMNS = ["series", "x", "y"]
CIRCLE_POINTS = 73

Panels = Dict[str, pd.DataFrame]


def _series(name: str, x, y) -> pd.DataFrame:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return pd.DataFrame({"series": [name] * len(x), "x": x, "y": y}, columns=COLUMNS)


def _stack(parts: Sequence[pd.DataFrame]) -> pd.DataFrame:
    parts = [p for p in parts if not p.empty]
    if not parts:
        return pd.DataFrame(columns=COLUMNS)
    return pd.concat(parts, ignore_index=True)


def _trace_frame(source) -> pd.DataFrame:
    if isinstance(source, SimTrace):
        return source.data
    if isinstance(source, pd.DataFrame) and "time" in source.columns:
        return source
    raise ConfigurationError("fig9-style needs a simulation trace")


def _trace_inverters(frame: pd.DataFrame) -> List[str]:
    return [c[3:-4] for c in frame.columns if c.startswith("inv") and c.endswith("_s_m")]


def trace_panels(source: Union[SimTrace, pd.DataFrame]) -> Panels:
    frame = _trace_frame(source)
    time = frame["time"]
    dynamic, static, vf = [], [], []
    for inv in _trace_inverters(frame):
        def col(name, inv=inv):
            return frame[inverter_column(inv, name)]

        for name in ("p", "q", "s", "s_ref"):
            dynamic.append(_series(f"{inv}_{name}", time, col(name)))
        static.append(_series(f"{inv}_pq", col("p"), col("q")))
        # One circle per distinct capacity the inverter was given during the run
        for s_ref in pd.unique(col("s_ref").dropna()):
            angles = np.linspace(0.0, 2.0 * np.pi, CIRCLE_POINTS)
            static.append(_series(f"{inv}_capacity_{s_ref:.4f}", s_ref * np.cos(angles), s_ref * np.sin(angles)))
        for name in ("f", "w_ref", "v"):
            vf.append(_series(f"{inv}_{name}", time, col(name)))
    return {"dynamic_output": _stack(dynamic), "static_output": _stack(static), "vf_traces": _stack(vf)}


def _map_frame(source) -> Tuple[pd.DataFrame, Tuple[float, float]]:
    if isinstance(source, FeasibilityMap):
        source = [source]
    if isinstance(source, pd.DataFrame):
        return source, (DF_MAX, DV_MAX)
    maps = list(source)
    if not maps or not all(isinstance(m, FeasibilityMap) for m in maps):
        raise ConfigurationError("fig6-style needs feasibility maps")
    frames = [m.to_frame() for m in maps]
    return pd.concat(frames, ignore_index=True), maps[0].security_box


def feasibility_panels(source, security_box: Optional[Tuple[float, float]] = None) -> Panels:
    frame, box = _map_frame(source)
    df_max, dv_max = security_box or box
    dv_cols = [c for c in frame.columns if c.startswith("delta_v_bus_")]
    parts = []
    if dv_cols and not frame.empty:
        dv_col = dv_cols[0]
        for lf, group in frame.groupby("load_factor", sort=True):
            feasible = group["feasible"].astype(bool)
            parts.append(_series(f"lf_{lf:.3f}_feasible", group.loc[feasible, dv_col], group.loc[feasible, "delta_f"]))
            parts.append(_series(f"lf_{lf:.3f}_infeasible", group.loc[~feasible, dv_col],
                                 group.loc[~feasible, "delta_f"]))
    corners_x = [-dv_max, dv_max, dv_max, -dv_max, -dv_max]
    corners_y = [-df_max, -df_max, df_max, df_max, -df_max]
    parts.append(_series("security_box", corners_x, corners_y))
    return {"scatter": _stack(parts)}


def _spectrum_frame(source) -> pd.DataFrame:
    if isinstance(source, EigenSweepResult):
        return source.to_frame()
    if isinstance(source, pd.DataFrame) and {"value", "re", "im"} <= set(source.columns):
        return source
    raise ConfigurationError("fig7-style needs a gain sweep result")


def sweep_panels(source: Union[EigenSweepResult, pd.DataFrame]) -> Panels:
    frame = _spectrum_frame(source)
    locus = [_series(f"gain_{value:.6g}", group["re"], group["im"])
             for value, group in frame.groupby("value", sort=True)]
    if frame.empty:
        max_real = pd.DataFrame(columns=COLUMNS)
    else:
        peak = frame.groupby("value", sort=True)["re"].max()
        max_real = _series("max_real", peak.index, peak.values)
    return {"locus": _stack(locus), "max_real": max_real}


LAYOUTS: Dict[str, Callable[..., Panels]] = {
    "fig6-style": feasibility_panels,
    "fig7-style": sweep_panels,
    "fig9-style": trace_panels,
}


def emit_plot_data(source, layout: str, out_dir: PathLike, scenario: str) -> List[Path]:
    """Write every panel of ``layout`` for ``source`` and return the written paths."""
    try:
        build = LAYOUTS[layout]
    except KeyError:
        raise ConfigurationError(f"Unknown plot layout {layout!r}; available: {', '.join(LAYOUTS)}") from None
    paths = []
    for panel, frame in build(source).items():
        path = artifact_path(out_dir, scenario, "plot", f"{layout}_{panel}")
        frame.to_csv(path, index=False)
        paths.append(path)
    logger.info(f"Plot data ({layout}) written: {', '.join(p.name for p in paths)}")
    return paths
