"""
Built-in scenario fixtures.

toy3      calibrated three-inverter ring with capacities proportional to 1/k_df
banshee7  seven-bus feeder with three inverters and five ZIP loads
scenario* event scripts on banshee7 (power regulator, V-f regulator, limiter baseline)
"""
import copy
from typing import Any, Callable, Dict, List, Tuple

from src.utils.errors import ConfigurationError

# (k_df, k_dv) and capacity in p.u. on 10 MVA
TOY_DROOP = ((0.01, 0.05), (0.005, 0.025), (0.01, 0.05))
TOY_CAPACITY = (0.075, 0.15, 0.075)
TOY_LINE = (0.02, 0.04)
TOY_POWER_FACTOR = 0.8
# (kp_s, ki_s, k_w, k_v)
TOY_POWER_REGULATOR = (1.0, 16.0, 0.002, 0.016)


def toy3(load_factor: float = 1.0) -> Dict[str, Any]:
    """Three inverter buses in a ring; each bus loaded in proportion to its inverter's capacity."""
    sin_phi = (1.0 - TOY_POWER_FACTOR ** 2) ** 0.5
    buses = [{"id": str(k + 1)} for k in range(3)]
    branches = [
        {"from_bus": a, "to_bus": b, "r": TOY_LINE[0], "x": TOY_LINE[1]}
        for a, b in (("1", "2"), ("2", "3"), ("3", "1"))
    ]
    loads = [
        {
            "bus": str(k + 1),
            "p": load_factor * s * TOY_POWER_FACTOR,
            "q": load_factor * s * sin_phi,
            "p_composition": (0.0, 0.0, 1.0),
            "q_composition": (1.0, 0.0, 0.0),
            "k_pf": 4.0,
            "k_qf": 0.0,
        }
        for k, s in enumerate(TOY_CAPACITY)
    ]
    inverters = [
        {
            "id": f"G{k + 1}",
            "bus": str(k + 1),
            "droop": droop,
            "power_regulator": TOY_POWER_REGULATOR,
            "vf_regulator": (0.05, 1.0, 0.05, 1.0),
            "s_ref": s,
            "r_c": 0.005,
            "l_c": 0.05,
        }
        for k, (droop, s) in enumerate(zip(TOY_DROOP, TOY_CAPACITY))
    ]
    return {
        "name": "toy3",
        "description": "Three-inverter ring, total load equal to total capacity at load factor 1",
        "network": {"buses": buses, "branches": branches},
        "loads": loads,
        "inverters": inverters,
        "engine": {"kind": "feasibility", "t_end": 10.0, "fidelity": "reduced",
                   "load_factors": [1.0, 1.02, 1.05, 1.08]},
    }


# ZIP compositions [Z, I, P] and [k_pf, k_qf] per load class
LOAD_CLASSES = {
    "L1": ((0.1, 0.3, 0.6), (0.5, 0.3, 0.2), (2.0, -0.1)),
    "L2": ((0.6, 0.2, 0.2), (0.6, 0.2, 0.2), (2.5, -2.0)),
    "C1": ((0.5, 0.3, 0.2), (0.2, 0.3, 0.5), (3.0, -0.1)),
    "C2": ((0.4, 0.3, 0.3), (0.4, 0.3, 0.3), (1.0, -0.5)),
    "P2": ((0.5, 0.3, 0.2), (0.5, 0.3, 0.2), (3.0, -1.0)),
}
BANSHEE_LOADS: List[Tuple[str, str, str, str]] = [
    ("L1", "104", "600 kW", "300 kVar"),
    ("L2", "105", "500 kW", "250 kVar"),
    ("C1", "107", "400 kW", "200 kVar"),
    ("C2", "106", "500 kW", "300 kVar"),
    ("P2", "102", "500 kW", "300 kVar"),
]
# id, bus, droop, (P0, Q0) droop setpoints
BANSHEE_POWER_REGULATOR = (0.5, 8.0, 0.02, 0.03)
BANSHEE_VF_REGULATOR = (0.05, 3.0, 0.05, 3.0)
BANSHEE_INVERTERS = [
    ("G1", "101", (0.01, 0.05), ("1 MW", "800 kVar")),
    ("G2", "102", (0.005, 0.025), ("500 kW", "-300 kVar")),
    ("G3", "103", (0.01, 0.05), ("1 MW", "800 kVar")),
]
# stiffer allocation for the overload runs, where every inverter is constrained at once
OVERLOAD_POWER_REGULATOR = (0.5, 16.0, 0.1, 0.15)
BANSHEE_LINES = [
    ("101", "104"), ("104", "105"), ("105", "102"), ("102", "106"),
    ("106", "103"), ("103", "107"), ("107", "104"),
]


def banshee7(power_regulator: Tuple[float, float, float, float] = BANSHEE_POWER_REGULATOR) -> Dict[str, Any]:
    loads = []
    for name, bus, p, q in BANSHEE_LOADS:
        p_comp, q_comp, (k_pf, k_qf) = LOAD_CLASSES[name]
        loads.append({"bus": bus, "name": name, "p": p, "q": q, "p_composition": p_comp,
                      "q_composition": q_comp, "k_pf": k_pf, "k_qf": k_qf})
    inverters = [
        {"id": inv_id, "bus": bus, "droop": droop, "p0": p0, "q0": q0,
         "power_regulator": power_regulator, "vf_regulator": BANSHEE_VF_REGULATOR,
         "current_gains": (2.0, 2.0), "voltage_gains": (1.0, 1.0), "s_ref": "2 MVA",
         "r_c": 0.005, "l_c": 0.05}
        for inv_id, bus, droop, (p0, q0) in BANSHEE_INVERTERS
    ]
    return {
        "name": "banshee7",
        "description": "Seven-bus feeder approximation with inverters G1-G3 and loads L1, L2, C1, C2, P2",
        "base": {"s_base": "10 MVA", "f_base": "60 Hz", "v_base": ["12.47 kV"]},
        "network": {
            "buses": [{"id": b} for b in ("101", "102", "103", "104", "105", "106", "107")],
            "branches": [{"from_bus": a, "to_bus": b, "r": "0.3 ohm", "x": "0.6 ohm"} for a, b in BANSHEE_LINES],
        },
        "loads": loads,
        "inverters": inverters,
        "engine": {"kind": "equilibrium", "t_end": 20.0, "fidelity": "reduced"},
    }


def _capacity_events(time: float, capacities: Tuple[str, str, str]) -> List[Dict[str, Any]]:
    return [{"time": time, "kind": "set_capacity", "inverter": inv, "s_ref": s}
            for inv, s in zip(("G1", "G2", "G3"), capacities)]


def _with(base: Dict[str, Any], name: str, description: str, events, **engine) -> Dict[str, Any]:
    data = copy.deepcopy(base)
    data["name"] = name
    data["description"] = description
    data["events"] = events
    data["engine"] = {"kind": "simulate", "t_end": 20.0, "fidelity": "reduced", **engine}
    return data


def scenario1() -> Dict[str, Any]:
    events = _capacity_events(8.0, ("1.2 MVA", "0.6 MVA", "2.0 MVA"))
    events.append({"time": 8.0, "kind": "enable_power_reg"})
    events.append({"time": 12.0, "kind": "load_step", "bus": "106", "dp": "200 kW", "dq": "100 kVar"})
    return _with(banshee7(), "scenario1", "Power regulators enabled at 8 s, C2 load step at 12 s", events)


def _scenario2_events(dp: str, dq: str) -> List[Dict[str, Any]]:
    events = [{"time": 8.0, "kind": "load_step", "bus": "106", "dp": dp, "dq": dq}]
    events += _capacity_events(12.0, ("1.2 MVA", "0.6 MVA", "1.2 MVA"))
    events.append({"time": 12.0, "kind": "enable_power_reg"})
    events.append({"time": 16.0, "kind": "enable_vf_reg"})
    return events


def scenario2_1() -> Dict[str, Any]:
    return _with(banshee7(OVERLOAD_POWER_REGULATOR), "scenario2_1", "Reactive-heavy C2 step, power then V-f regulators",
                 _scenario2_events("100 kW", "200 kVar"), t_end=24.0)


def scenario2_2() -> Dict[str, Any]:
    return _with(banshee7(OVERLOAD_POWER_REGULATOR), "scenario2_2", "Active-heavy C2 step, power then V-f regulators",
                 _scenario2_events("200 kW", "100 kVar"), t_end=24.0)


def scenario1_limiter() -> Dict[str, Any]:
    events = _capacity_events(8.0, ("1.2 MVA", "0.6 MVA", "2.0 MVA"))
    events.append({"time": 8.0, "kind": "enable_current_limiter", "priority": True})
    events.append({"time": 12.0, "kind": "load_step", "bus": "106", "dp": "200 kW", "dq": "100 kVar"})
    return _with(banshee7(), "scenario1_limiter", "Scenario 1 with adaptive current limiters instead of power regulators",
                 events, t_end=14.0, fidelity="full")


def _limiter_overload(staggered: bool) -> List[Dict[str, Any]]:
    # heavy enough that every inverter-side current exceeds its threshold at 12 s
    events = [{"time": 8.0, "kind": "load_step", "bus": "106", "dp": "600 kW", "dq": "300 kVar"}]
    events += _capacity_events(12.0, ("1.2 MVA", "0.6 MVA", "1.2 MVA"))
    for inv in ("G1", "G2", "G3"):
        if staggered and inv == "G3":
            events.append({"time": 12.5, "kind": "enable_current_limiter", "inverter": inv,
                           "priority": True, "ramp_s": 1.0, "note": "staggered"})
        else:
            events.append({"time": 12.0, "kind": "enable_current_limiter", "inverter": inv, "priority": True})
    return events


def scenario2_limiter_simultaneous() -> Dict[str, Any]:
    return _with(banshee7(), "scenario2_limiter_simultaneous", "Overload with three limiters enabled together",
                 _limiter_overload(False), t_end=14.0, fidelity="full")


def scenario2_limiter_staggered() -> Dict[str, Any]:
    return _with(banshee7(), "scenario2_limiter_staggered",
                 "Overload with G3's limiter delayed 0.5 s and its threshold ramped down",
                 _limiter_overload(True), t_end=14.0, fidelity="full")


FIXTURES: Dict[str, Callable[[], Dict[str, Any]]] = {
    "toy3": toy3,
    "banshee7": banshee7,
    "scenario1": scenario1,
    "scenario2_1": scenario2_1,
    "scenario2_2": scenario2_2,
    "scenario1_limiter": scenario1_limiter,
    "scenario2_limiter_simultaneous": scenario2_limiter_simultaneous,
    "scenario2_limiter_staggered": scenario2_limiter_staggered,
}


def get_fixture(name: str) -> Dict[str, Any]:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ConfigurationError(f"Unknown fixture {name!r}; available: {', '.join(sorted(FIXTURES))}") from None


def list_fixtures() -> List[Tuple[str, str]]:
    return [(name, FIXTURES[name]()["description"]) for name in FIXTURES]
