"""
Artifact writers and plot-ready data tables.
"""
from src.output.writers import (
    artifact_path,
    write_json,
    write_trace,
    write_equilibrium,
    write_feasibility,
    write_spectrum,
)
from src.output.plot_data import LAYOUTS, emit_plot_data

__all__ = [
    'artifact_path',
    'write_json',
    'write_trace',
    'write_equilibrium',
    'write_feasibility',
    'write_spectrum',
    'LAYOUTS',
    'emit_plot_data',
]
