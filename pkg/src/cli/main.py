"""
Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure or incomplete run.
Diagnostics go to stderr through loguru; data goes to files under --out.
"""
import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from config.settings import settings
from src.equilibrium.feasibility import min_shed_search, sweep_feasibility
from src.equilibrium.solver import equilibrium_residuals, solve_droop_equilibrium
from src.job_queue.sweep_pool import SweepPool
from src.output.plot_data import LAYOUTS, emit_plot_data
from src.output.writers import (
    artifact_path,
    write_equilibrium,
    write_feasibility,
    write_spectrum,
    write_trace,
)
from src.scenario.fixtures import get_fixture, list_fixtures
from src.scenario.loader import Scenario, format_validation_error, load_scenario, parse_scenario
from src.smallsignal.sweep import gain_sweep
from src.tds.engine import compare_limiter, simulate
from src.tds.events import Event, EventKind
from src.tds.model import Fidelity
from src.utils.errors import ConfigurationError, MicrogridError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

# engine directory and artifact read back by plot-data, per layout
PLOT_SOURCES = {
    "fig6-style": ("feasibility", "map_lf_*.csv"),
    "fig7-style": ("eigen", "spectrum.csv"),
    "fig9-style": ("simulate", "trace.csv"),
}


def _load_factors(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_source(parser: argparse.ArgumentParser, required: bool = True):
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--fixture", help="Built-in scenario name (see list-fixtures)")
    group.add_argument("--config", type=Path, help="Scenario JSON file")


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--out", type=Path, default=Path(settings.output_dir), help="Output directory")
    parser.add_argument("--workers", type=int, default=settings.workers, help="Sweep worker threads")
    parser.add_argument("--dt", type=float, default=None, help="Integration step in seconds")
    parser.add_argument("--fidelity", choices=[f.value for f in Fidelity], default=None)
    parser.add_argument("--seed", type=int, default=None, help="Reserved; every engine is deterministic")
    parser.add_argument("--load-factors", type=_load_factors, default=None, help="e.g. 1.02,1.05,1.08")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microgrid", description="Islanded microgrid capacity-constrained control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "Time-domain simulation of the scenario's event script"),
        ("equilibrium", "Droop equilibrium of the scenario"),
        ("feasibility", "Capacity-constrained feasibility maps and minimum shed"),
        ("eigen", "Eigenvalue sweep over a droop or regulator gain"),
        ("validate", "Validate a scenario and print the resolved model summary"),
        ("compare", "Power regulator against current-limiter baseline on the same scenario"),
    ):
        cmd = sub.add_parser(name, help=text)
        _add_source(cmd)
        _add_common(cmd)
    sub.add_parser("list-fixtures", help="List the built-in scenarios")
    plot = sub.add_parser("plot-data", help="Tidy plot tables from previously written outputs")
    _add_source(plot, required=False)
    plot.add_argument("--name", help="Scenario name when neither --fixture nor --config is given")
    plot.add_argument("--layout", choices=sorted(LAYOUTS), required=True)
    plot.add_argument("--out", type=Path, default=Path(settings.output_dir))
    return parser


def _scenario(args: argparse.Namespace) -> Scenario:
    if args.fixture:
        return parse_scenario(get_fixture(args.fixture))
    return load_scenario(args.config)


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    config = scenario.sim_config(dt=args.dt, fidelity=args.fidelity)
    logger.info(f"Simulating '{scenario.name}' ({config.fidelity.value}, t_end={config.t_end}s, dt={config.step})")
    trace = simulate(scenario.model(config.fidelity.value), config, scenario.events)
    write_trace(trace, args.out, scenario.name)
    if not trace.completed:
        logger.error(f"Simulation incomplete: {trace.failure}")
        return EXIT_NUMERICAL
    logger.success(f"Simulation of '{scenario.name}' finished")
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    scenario = _scenario(args)
    problem = scenario.equilibrium_problem()
    factors = args.load_factors or [1.0]
    if len(factors) > 1:
        logger.warning(f"equilibrium uses the first load factor only ({factors[0]})")
    problem = problem.with_load_factor(factors[0])
    solution = solve_droop_equilibrium(problem)
    write_equilibrium(solution, args.out, scenario.name, equilibrium_residuals(problem, solution))
    logger.success(f"Equilibrium of '{scenario.name}': f={solution.f:.6f} p.u.")
    return EXIT_OK


def cmd_feasibility(args) -> int:
    scenario = _scenario(args)
    engine = scenario.engine
    problem = scenario.equilibrium_problem()
    factors = args.load_factors or engine.load_factors
    pool = SweepPool(args.workers, name="feasibility")
    options = {"n_angles": engine.n_angles, "window": engine.window, "full_grid": engine.full_grid}
    maps = sweep_feasibility(problem, factors, pool=pool, **options)
    min_shed: Dict[float, Optional[float]] = {}
    for fmap in maps:
        if fmap.is_empty:
            min_shed[fmap.load_factor] = min_shed_search(problem, fmap.load_factor, pool=pool, **options)
        else:
            min_shed[fmap.load_factor] = 0.0
    write_feasibility(maps, args.out, scenario.name, min_shed)
    counts = ", ".join(f"{m.load_factor:g}: {m.feasible_count}/{len(m.samples)}" for m in maps)
    logger.success(f"Feasibility maps written ({counts})")
    return EXIT_OK


def cmd_eigen(args) -> int:
    scenario = _scenario(args)
    # controller modes only exist at FULL fidelity
    # the sweep reads the controller spectrum, which the reduced model drops
    model = scenario.model(args.fidelity or Fidelity.FULL.value)
    pool = SweepPool(args.workers, name="eigen")
    result = gain_sweep(model, engine.condition, grid=engine.grid, pool=pool)
    write_spectrum(result, args.out, scenario.name)
    if result.truncated:
        logger.error(f"Eigen sweep truncated: {'; '.join(result.diagnostics)}")
        return EXIT_NUMERICAL
    logger.success(f"Eigen sweep of '{scenario.name}' finished ({len(result.evaluated)} points)")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _scenario(args)
    for key, value in scenario.summary().items():
        print(f"{key}: {value}")
    logger.success(f"Scenario '{scenario.name}' is valid")
    return EXIT_OK


def limiter_counterpart(events: Sequence[Event]) -> List[Event]:
    """Same script with every power-regulator enable replaced by a current-limiter enable."""
    swapped = []
    for event in events:
        if event.kind is EventKind.ENABLE_POWER_REG:
            event = Event(time=event.time, kind=EventKind.ENABLE_CURRENT_LIMITER, inverter=event.inverter,
                          priority=True, note="replaces power regulator")
        swapped.append(event)
    return swapped


def cmd_compare(args) -> int:
    scenario = _scenario(args)
    config = scenario.sim_config(dt=args.dt, fidelity=Fidelity.FULL.value)
    regulator = scenario.events
    if not any(e.kind is EventKind.ENABLE_POWER_REG for e in regulator):
        raise ConfigurationError(f"Scenario '{scenario.name}' never enables the power regulator")
    frame = compare_limiter(scenario.model(Fidelity.FULL.value), config, regulator, limiter_counterpart(regulator))
    path = artifact_path(args.out, scenario.name, "compare", "deviation")
    frame.to_csv(path, index=False)
    if not frame["completed"].all():
        logger.error("At least one comparison run did not complete")
        return EXIT_NUMERICAL
    logger.success(f"Comparison written to {path}")
    return EXIT_OK


def cmd_list_fixtures(args) -> int:
    for name, description in list_fixtures():
        print(f"{name}\t{description}")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    if args.fixture or args.config:
        name = _scenario(args).name
    elif args.name:
        name = args.name
    else:
        raise ConfigurationError("plot-data needs --fixture, --config or --name")
    engine, pattern = PLOT_SOURCES[args.layout]
    folder = Path(args.out) / name / engine
    files = sorted(folder.glob(pattern))
    if not files:
        raise ConfigurationError(f"No {engine} output under {folder}; run '{engine}' first")
    frame = pd.concat([pd.read_csv(f) for f in files], ignore_index=True)
    emit_plot_data(frame, args.layout, args.out, name)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "feasibility": cmd_feasibility,
    "eigen": cmd_eigen,
    "validate": cmd_validate,
    "compare": cmd_compare,
    "list-fixtures": cmd_list_fixtures,
    "plot-data": cmd_plot_data,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that code is reserved for numerical failures
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "seed", None) is not None:
        logger.debug(f"--seed {args.seed} ignored: no stochastic components")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        logger.error("Scenario validation failed")
        for line in format_validation_error(exc):
            print(line, file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error(f"Numerical failure ({type(exc).__name__}): {exc}")
        return EXIT_NUMERICAL
    except MicrogridError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run(sys.argv[1:]))
