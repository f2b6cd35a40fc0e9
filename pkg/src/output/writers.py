"""
Artifact writers. Every artifact lands at <out>/<scenario>/<engine>/<artifact>.<ext>.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.equilibrium.feasibility import FeasibilityMap
from src.equilibrium.problem import EquilibriumSolution
from src.smallsignal.sweep import EigenSweepResult
from src.tds.trace import SimTrace

PathLike = Union[str, Path]


def artifact_path(out_dir: PathLike, scenario: str, engine: str, artifact: str, ext: str = "csv") -> Path:
    path = Path(out_dir) / scenario / engine / f"{artifact}.{ext}"
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(data: Dict[str, Any], path: Path) -> Path:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(data), f, indent=2, ensure_ascii=False)
    except OSError as e:
        logger.error(f"Error writing {path}: {str(e)}")
        raise
    return path


def write_trace(trace: SimTrace, out_dir: PathLike, scenario: str) -> List[Path]:
    """Trace CSV plus the events JSON sidecar."""
    csv_path = artifact_path(out_dir, scenario, "simulate", "trace")
    trace.data.to_csv(csv_path, index=False)
    sidecar = {
        "fidelity": trace.fidelity,
        "completed": trace.completed,
        "failure": trace.failure,
        "samples": int(len(trace.data)),
        "events": trace.event_records(),
    }
    events_path = write_json(sidecar, artifact_path(out_dir, scenario, "simulate", "events", "json"))
    logger.info(f"Trace written to {csv_path} ({len(trace.data)} rows)")
    return [csv_path, events_path]


def write_equilibrium(solution: EquilibriumSolution, out_dir: PathLike, scenario: str,
                      residuals: Optional[Dict[str, float]] = None) -> List[Path]:
    frame = pd.DataFrame({
        "node": solution.node_ids,
        "v": solution.v,
        "theta": solution.theta,
        "p_load": solution.p_load,
        "q_load": solution.q_load,
    })
    csv_path = artifact_path(out_dir, scenario, "equilibrium", "nodes")
    frame.to_csv(csv_path, index=False)
    summary = dict(solution.summary())
    if residuals is not None:
        summary["residuals"] = residuals
    json_path = write_json(summary, artifact_path(out_dir, scenario, "equilibrium", "summary", "json"))
    return [csv_path, json_path]


def write_feasibility(maps: Iterable[FeasibilityMap], out_dir: PathLike, scenario: str,
                      min_shed: Optional[Dict[float, Optional[float]]] = None) -> List[Path]:
    """One map CSV per load factor and a summary JSON with feasible counts and minimum shed."""
    maps = list(maps)
    paths = []
    entries = []
    for fmap in maps:
        name = f"map_lf_{fmap.load_factor:.3f}"
        path = artifact_path(out_dir, scenario, "feasibility", name)
        fmap.to_frame().to_csv(path, index=False)
        paths.append(path)
        entries.append({
            "load_factor": fmap.load_factor,
            "samples": len(fmap.samples),
            "feasible": fmap.feasible_count,
            "binding": fmap.binding,
            "arc_width": fmap.arc_width(),
            "min_shed": (min_shed or {}).get(fmap.load_factor),
            "file": path.name,
        })
    box = maps[0].security_box if maps else (None, None)
    summary = {"security_box": {"df_max": box[0], "dv_max": box[1]}, "maps": entries}
    paths.append(write_json(summary, artifact_path(out_dir, scenario, "feasibility", "summary", "json")))
    return paths


def write_spectrum(result: EigenSweepResult, out_dir: PathLike, scenario: str) -> List[Path]:
    """Spectrum CSV (re, im per mode per grid point) plus the crossing summary JSON."""
    csv_path = artifact_path(out_dir, scenario, "eigen", "spectrum")
    result.to_frame().to_csv(csv_path, index=False)
    json_path = write_json(result.summary(), artifact_path(out_dir, scenario, "eigen", "crossing", "json"))
    return [csv_path, json_path]
