"""
Small-signal analysis: linearization, state matrix, spectra and gain sweeps.
"""
from src.smallsignal.linearize import (
    LinearizedModel,
    linearize_dae,
    linearize,
    reduce_state_matrix,
    eigenvalues,
    modal_table,
    small_signal_stable,
    pair_spectra,
    ringdown_modes,
)
from src.smallsignal.sweep import (
    SweepCondition,
    EigenSweepResult,
    sweep_spectra,
    gain_sweep,
    default_grid,
)

__all__ = [
    'LinearizedModel',
    'linearize_dae',
    'linearize',
    'reduce_state_matrix',
    'eigenvalues',
    'modal_table',
    'small_signal_stable',
    'pair_spectra',
    'ringdown_modes',
    'SweepCondition',
    'EigenSweepResult',
    'sweep_spectra',
    'gain_sweep',
    'default_grid',
]
