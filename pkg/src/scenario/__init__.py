"""
Scenario files: schema, unit conversion, loader and built-in fixtures.
"""
from src.scenario.models import ScenarioFile, EngineKind
from src.scenario.units import to_per_unit, split_quantity
from src.scenario.loader import (
    Scenario,
    build_scenario,
    parse_scenario,
    load_scenario,
    dump_scenario,
    format_validation_error,
)
from src.scenario.fixtures import FIXTURES, get_fixture, list_fixtures

__all__ = [
    'ScenarioFile',
    'EngineKind',
    'to_per_unit',
    'split_quantity',
    'Scenario',
    'build_scenario',
    'parse_scenario',
    'load_scenario',
    'dump_scenario',
    'format_validation_error',
    'FIXTURES',
    'get_fixture',
    'list_fixtures',
]
