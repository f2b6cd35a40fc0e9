"""
Static analysis: droop equilibrium, constrained transitions and feasibility maps.
"""
from src.equilibrium.problem import (
    Mode,
    DroopUnit,
    EquilibriumProblem,
    EquilibriumSolution,
)
from src.equilibrium.solver import (
    newton_solve,
    solve_droop_equilibrium,
    solve_constrained_transition,
    equilibrium_residuals,
)
from src.equilibrium.feasibility import (
    FeasibilitySample,
    FeasibilityMap,
    sweep_feasibility,
    min_shed_search,
    is_capacity_binding,
)

__all__ = [
    'Mode',
    'DroopUnit',
    'EquilibriumProblem',
    'EquilibriumSolution',
    'newton_solve',
    'solve_droop_equilibrium',
    'solve_constrained_transition',
    'equilibrium_residuals',
    'FeasibilitySample',
    'FeasibilityMap',
    'sweep_feasibility',
    'min_shed_search',
    'is_capacity_binding',
]
