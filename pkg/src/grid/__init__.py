"""
Static microgrid description: buses, branches, ZIP loads and the augmented node set.
"""
from src.grid.network import (
    PerUnitBase,
    Bus,
    Branch,
    NetworkModel,
    build_admittance,
    network_injections,
    injection_jacobian,
    branch_losses,
)
from src.grid.zip_load import ZipLoadParams, LoadTable, eval_zip_load
from src.grid.topology import AugmentedNetwork, CouplingSpec

__all__ = [
    'PerUnitBase',
    'Bus',
    'Branch',
    'NetworkModel',
    'build_admittance',
    'network_injections',
    'injection_jacobian',
    'branch_losses',
    'ZipLoadParams',
    'LoadTable',
    'eval_zip_load',
    'AugmentedNetwork',
    'CouplingSpec',
]
