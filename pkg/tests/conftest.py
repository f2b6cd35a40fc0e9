"""
Shared fixtures: the calibrated toy microgrid, the seven-bus feeder and small hand-built networks.
"""
import numpy as np
import pytest

from config.settings import Settings
from src.grid.network import Branch, Bus, NetworkModel
from src.grid.zip_load import ZipLoadParams
from src.scenario.fixtures import banshee7, toy3
from src.scenario.loader import parse_scenario
from src.tds.model import Fidelity


@pytest.fixture
def test_settings(tmp_path):
    return Settings(output_dir=str(tmp_path / "output"), log_dir=str(tmp_path / "logs"), workers=1)


@pytest.fixture
def toy_scenario():
    return parse_scenario(toy3())


@pytest.fixture
def toy_problem(toy_scenario):
    return toy_scenario.equilibrium_problem()


@pytest.fixture
def toy_model(toy_scenario):
    return toy_scenario.model(Fidelity.REDUCED.value)


@pytest.fixture
def banshee_scenario():
    return parse_scenario(banshee7())


@pytest.fixture
def three_bus_network():
    """Radial 1-2-3 with a constant-power load at bus 3."""
    buses = [
        Bus("1"),
        Bus("2"),
        Bus("3", load=ZipLoadParams(p0=0.3, q0=0.1)),
    ]
    branches = [
        Branch.from_impedance("1", "2", 0.01, 0.05),
        Branch.from_impedance("2", "3", 0.02, 0.04),
    ]
    return NetworkModel.build(buses, branches)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
