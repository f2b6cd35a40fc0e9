"""
Admittance assembly, polar injections, Jacobian and the augmented node set.
"""
import numpy as np
import pytest

from src.grid.network import (
    Branch,
    Bus,
    NetworkModel,
    PerUnitBase,
    branch_losses,
    injection_jacobian,
    network_injections,
)
from src.grid.topology import AugmentedNetwork, CouplingSpec
from src.grid.zip_load import ZipLoadParams
from src.utils.errors import ConfigurationError


def _random_point(n, rng):
    v = 1.0 + 0.05 * rng.standard_normal(n)
    theta = 0.1 * rng.standard_normal(n)
    return v, theta


def test_per_unit_base():
    base = PerUnitBase()
    assert base.w_base == pytest.approx(2 * np.pi * 60)
    assert base.z_base() == pytest.approx(12.47e3 ** 2 / 10e6)


def test_admittance_rows_sum_to_zero_without_shunts(three_bus_network):
    y = three_bus_network.y_matrix
    assert np.allclose(y, y.T)
    assert np.allclose(y.sum(axis=1), 0.0)


def test_shunt_lands_on_diagonal():
    buses = [Bus("a", g_shunt=0.1, b_shunt=-0.2), Bus("b")]
    net = NetworkModel.build(buses, [Branch("a", "b", 1.0, -5.0)])
    assert net.y_matrix[0, 0] == pytest.approx(complex(1.1, -5.2))
    assert net.y_matrix[0, 1] == pytest.approx(complex(-1.0, 5.0))


def test_injections_match_complex_power(three_bus_network, rng):
    v, theta = _random_point(3, rng)
    p, q = network_injections(three_bus_network, v, theta)
    vc = v * np.exp(1j * theta)
    s = vc * np.conj(three_bus_network.y_matrix @ vc)
    assert p == pytest.approx(s.real, abs=1e-12)
    assert q == pytest.approx(s.imag, abs=1e-12)


def test_injection_jacobian_against_finite_differences(three_bus_network, rng):
    y = np.asarray(three_bus_network.y_matrix)
    v, theta = _random_point(3, rng)
    ds_dvm, ds_dva = injection_jacobian(y, v, theta)

    def s_of(vm, va):
        vc = vm * np.exp(1j * va)
        return vc * np.conj(y @ vc)

    h = 1e-7
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd_vm = (s_of(v + e, theta) - s_of(v - e, theta)) / (2 * h)
        fd_va = (s_of(v, theta + e) - s_of(v, theta - e)) / (2 * h)
        assert ds_dvm[:, k] == pytest.approx(fd_vm, abs=1e-6)
        assert ds_dva[:, k] == pytest.approx(fd_va, abs=1e-6)


def test_losses_equal_total_injection(three_bus_network, rng):
    v, theta = _random_point(3, rng)
    p, _ = network_injections(three_bus_network, v, theta)
    losses = branch_losses(three_bus_network.buses, three_bus_network.branches, v, theta)
    assert losses == pytest.approx(p.sum(), abs=1e-12)
    assert losses > 0


@pytest.mark.parametrize("r, x", [(0.0, 0.0)])
def test_zero_impedance_rejected(r, x):
    with pytest.raises(ConfigurationError):
        Branch.from_impedance("1", "2", r, x)


def test_self_loop_and_unknown_bus_rejected():
    with pytest.raises(ConfigurationError):
        Branch("1", "1", 1.0, -1.0)
    with pytest.raises(ConfigurationError):
        NetworkModel.build([Bus("1")], [Branch("1", "9", 1.0, -1.0)])


def test_disconnected_network_is_built():
    net = NetworkModel.build([Bus("1"), Bus("2"), Bus("3")], [Branch("1", "2", 1.0, -2.0)])
    assert net.y_matrix[2, 2] == 0


class TestAugmentedNetwork:
    def test_terminal_nodes_appended(self, three_bus_network):
        net = AugmentedNetwork(three_bus_network, [
            CouplingSpec("G1", "1", 0.005, 0.05),
            CouplingSpec("G2", "3"),
        ])
        assert net.n_node == 4
        assert net.node_ids[-1] == "G1:terminal"
        assert list(net.inverter_node) == [3, 2]
        assert list(net.monitored_bus_nodes()) == [0, 2]
        y_c = 1.0 / complex(0.005, 0.05)
        assert net.y_matrix[3, 0] == pytest.approx(-y_c)
        assert net.y_matrix[3, 3] == pytest.approx(y_c)

    def test_terminal_nodes_carry_no_load(self, three_bus_network):
        net = AugmentedNetwork(three_bus_network, [CouplingSpec("G1", "1", 0.0, 0.1)])
        table = net.load_table()
        p, q = table.evaluate(np.ones(net.n_node), 1.0)
        assert p == pytest.approx([0.0, 0.0, 0.3, 0.0])
        assert q == pytest.approx([0.0, 0.0, 0.1, 0.0])

    def test_load_override(self, three_bus_network):
        net = AugmentedNetwork(three_bus_network, [CouplingSpec("G1", "1")])
        table = net.load_table({"2": ZipLoadParams(p0=0.2, q0=0.0)})
        assert table.total_base() == pytest.approx((0.5, 0.1))
        with pytest.raises(ConfigurationError):
            net.load_table({"nope": None})

    def test_source_current_covers_local_load(self, three_bus_network, rng):
        net = AugmentedNetwork(three_bus_network, [CouplingSpec("G1", "3")])
        v, theta = _random_point(3, rng)
        table = net.load_table()
        current = net.node_currents(v, theta, table, 1.0)
        vc = v * np.exp(1j * theta)
        s_supplied = vc * np.conj(current)
        s_network = vc * np.conj(net.y_matrix @ vc)
        assert s_supplied[2] == pytest.approx(s_network[2] + complex(0.3, 0.1))

    @pytest.mark.parametrize("couplings", [
        [],
        [CouplingSpec("G1", "1"), CouplingSpec("G1", "2")],
        [CouplingSpec("G1", "1"), CouplingSpec("G2", "1")],
        [CouplingSpec("G1", "9")],
    ])
    def test_invalid_couplings(self, three_bus_network, couplings):
        with pytest.raises(ConfigurationError):
            AugmentedNetwork(three_bus_network, couplings)
