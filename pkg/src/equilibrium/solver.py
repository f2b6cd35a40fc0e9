"""
Newton solvers for the droop equilibrium and the capacity-constrained transition.

Unknowns are x = [f, V (every node), theta (every node except the reference)].
Residual rows are ordered P-rows for all nodes, then Q-rows for all nodes.
"""
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from loguru import logger

from config.settings import settings
from src.equilibrium.problem import EquilibriumProblem, EquilibriumSolution, Mode
from src.grid.network import injection_jacobian, network_injections
from src.utils.errors import (
    ConfigurationError,
    InfeasiblePoint,
    NonConvergence,
    NumericalError,
    SingularJacobian,
)

MAX_HALVINGS = 10
CONDITION_LIMIT = 1e14
MIN_VOLTAGE = 1e-3


class _System:
    """Residual and Jacobian of one problem on its augmented node set."""

    def __init__(self, problem: EquilibriumProblem):
        self.problem = problem
        self.net = problem.augmented
        self.loads = problem.load_table()
        self.n = self.net.n_node
        self.ref = self.net.reference_node
        self.theta_cols = [k for k in range(self.n) if k != self.ref]
        self.inv_nodes = self.net.inverter_node
        self.units = problem.inverters
        if problem.mode is Mode.CONSTRAINED:
            p_gen, q_gen = problem.generation_targets()
            self.p_gen = np.zeros(self.n)
            self.q_gen = np.zeros(self.n)
            np.add.at(self.p_gen, self.inv_nodes, p_gen)
            np.add.at(self.q_gen, self.inv_nodes, q_gen)

    @property
    def size(self) -> int:
        return 2 * self.n

    def unpack(self, x: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        f = x[0]
        v = x[1:1 + self.n]
        theta = np.zeros(self.n)
        theta[self.theta_cols] = x[1 + self.n:]
        return f, v, theta

    def flat_start(self) -> np.ndarray:
        v0 = np.ones(self.n)
        for unit, node in zip(self.units, self.inv_nodes):
            v0[node] = unit.v0
        return np.concatenate(([self.problem.f0], v0, np.zeros(self.n - 1)))

    def residual(self, x: np.ndarray) -> np.ndarray:
        f, v, theta = self.unpack(x)
        p_inj, q_inj = network_injections(self.net.y_matrix, v, theta)
        p_l, q_l = self.loads.evaluate(v, f)
        r_p = p_inj + p_l
        r_q = q_inj + q_l
        if self.problem.mode is Mode.CONSTRAINED:
            return np.concatenate((r_p - self.p_gen, r_q - self.q_gen))
        for unit, k in zip(self.units, self.inv_nodes):
            p_inv, q_inv = r_p[k], r_q[k]
            r_p[k] = f - (unit.f0 + unit.k_df * (unit.p0 - p_inv) + unit.supp_w)
            r_q[k] = v[k] - (unit.v0 + unit.k_dv * (unit.q0 - q_inv) + unit.supp_v)
        return np.concatenate((r_p, r_q))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        f, v, theta = self.unpack(x)
        ds_dvm, ds_dva = injection_jacobian(self.net.y_matrix, v, theta)
        sens = self.loads.sensitivities(v, f)
        n = self.n

        dp = np.zeros((n, 2 * n))
        dq = np.zeros((n, 2 * n))
        dp[:, 0] = sens["dp_df"]
        dq[:, 0] = sens["dq_df"]
        dp[:, 1:1 + n] = ds_dvm.real + np.diag(sens["dp_dv"])
        dq[:, 1:1 + n] = ds_dvm.imag + np.diag(sens["dq_dv"])
        dp[:, 1 + n:] = ds_dva.real[:, self.theta_cols]
        dq[:, 1 + n:] = ds_dva.imag[:, self.theta_cols]

        if self.problem.mode is Mode.DROOP:
            for unit, k in zip(self.units, self.inv_nodes):
                row_p = unit.k_df * dp[k]
                row_p[0] += 1.0
                row_q = unit.k_dv * dq[k]
                row_q[1 + k] += 1.0
                dp[k], dq[k] = row_p, row_q
        return np.vstack((dp, dq))

    def solution(self, x: np.ndarray, norm: float, iterations: int) -> EquilibriumSolution:
        f, v, theta = self.unpack(x)
        p_inj, q_inj = network_injections(self.net.y_matrix, v, theta)
        p_l, q_l = self.loads.evaluate(v, f)
        nodes = self.inv_nodes
        return EquilibriumSolution(
            f=float(f),
            v=v.copy(),
            theta=theta,
            p_inv=(p_inj + p_l)[nodes],
            q_inv=(q_inj + q_l)[nodes],
            p_load=p_l,
            q_load=q_l,
            residual_norm=float(norm),
            iterations=iterations,
            node_ids=self.net.node_ids,
            n_bus=self.net.network.n_bus,
            mode=self.problem.mode,
            f0=self.problem.f0,
        )


def _inf_norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    admissible: Optional[Callable[[np.ndarray], bool]] = None,
) -> Tuple[np.ndarray, float, int]:
    """
    Damped Newton iteration: the step is halved while the residual grows.

    After reaching ``tol`` one extra polishing step is taken if it lowers the residual.
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    norm = _inf_norm(r)
    best_x, best_norm = x.copy(), norm

    for iteration in range(max_iter + 1):
        if norm <= tol:
            x_pol, norm_pol = _polish(residual, jacobian, x, r)
            if norm_pol < norm:
                x, norm = x_pol, norm_pol
            return x, norm, iteration
        if iteration == max_iter:
            break

        jac = jacobian(x)
        try:
            cond = np.linalg.cond(jac)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"Jacobian condition check failed: {exc}") from exc
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise SingularJacobian(f"Jacobian is singular (condition number {cond:.3e})")
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"Jacobian is singular: {exc}") from exc

        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + step * dx
            ok = np.all(np.isfinite(x_new)) and (admissible is None or admissible(x_new))
            if ok:
                r_new = residual(x_new)
                norm_new = _inf_norm(r_new)
                if np.isfinite(norm_new) and norm_new < norm:
                    break
            step *= 0.5
        else:
            if not ok:
                break
        x, r, norm = x_new, r_new, norm_new
        logger.debug(f"Newton iteration {iteration + 1}: residual {norm:.3e} (step {step:g})")
        if norm < best_norm:
            best_x, best_norm = x.copy(), norm

    raise NonConvergence(
        f"Newton did not converge in {max_iter} iterations (best residual {best_norm:.3e})",
        best_iterate=best_x,
        diagnostics={"best_residual": best_norm, "iterations": max_iter},
    )


def _polish(residual, jacobian, x, r):
    try:
        x_new = x + np.linalg.solve(jacobian(x), -r)
    except np.linalg.LinAlgError:
        return x, _inf_norm(r)
    if not np.all(np.isfinite(x_new)):
        return x, _inf_norm(r)
    return x_new, _inf_norm(residual(x_new))


def _initial_vector(system: _System, initial) -> np.ndarray:
    if initial is None:
        return system.flat_start()
    if isinstance(initial, EquilibriumSolution):
        return initial.as_vector(system.ref)
    x0 = np.asarray(initial, dtype=float)
    if x0.shape != (system.size,):
        raise ConfigurationError(f"Warm start has shape {x0.shape}, expected ({system.size},)")
    return x0


def solve_droop_equilibrium(
    problem: EquilibriumProblem,
    initial=None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> EquilibriumSolution:
    """
    Solve the droop equilibrium: f, every node voltage and every angle but the reference.

    Args:
        problem: A DROOP-mode problem.
        initial: Warm start, either a previous solution or a packed vector.
        tol: Residual infinity-norm tolerance; defaults to the settings value.
        max_iter: Newton iteration cap; defaults to the settings value.

    Returns:
        The solution with per-node voltages, angles and inverter injections.

    Raises:
        ConfigurationError: If the problem is not in DROOP mode.
        NonConvergence: If Newton stalls or exceeds ``max_iter``.
        SingularJacobian: If the linear solve breaks down.
    """
    if problem.mode is not Mode.DROOP:
        raise ConfigurationError("solve_droop_equilibrium needs a DROOP-mode problem")
    tol = settings.newton_tol if tol is None else tol
    max_iter = settings.newton_max_iter if max_iter is None else max_iter
    system = _System(problem)
    logger.debug(f"Solving droop equilibrium on {system.n} nodes")
    try:
        x, norm, iterations = newton_solve(
            system.residual, system.jacobian, _initial_vector(system, initial), tol, max_iter,
            admissible=lambda z: bool(np.all(z[1:1 + system.n] > MIN_VOLTAGE)),
        )
    except NumericalError as exc:
        logger.error(f"Droop equilibrium failed: {exc}")
        raise
    solution = system.solution(x, norm, iterations)
    logger.debug(f"Droop equilibrium: f={solution.f:.6f}, {iterations} iterations, residual {norm:.2e}")
    return solution


def solve_constrained_transition(
    problem: EquilibriumProblem,
    disturbance=None,
    initial=None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> EquilibriumSolution:
    """
    Operating point with every inverter pinned to its capacity circle.

    Inverter injections are fixed, so the ZIP voltage and frequency sensitivities must
    absorb the stepped load; f is closed by the aggregate active-power balance.
    """
    if problem.mode is not Mode.CONSTRAINED:
        raise ConfigurationError("solve_constrained_transition needs a CONSTRAINED-mode problem")
    tol = settings.newton_tol if tol is None else tol
    max_iter = settings.newton_max_iter if max_iter is None else max_iter
    stepped = problem.with_load_step(disturbance)
    system = _System(stepped)
    try:
        x, norm, iterations = newton_solve(
            system.residual, system.jacobian, _initial_vector(system, initial), tol, max_iter,
            admissible=lambda z: bool(np.all(z[1:1 + system.n] > MIN_VOLTAGE)),
        )
    except SingularJacobian as exc:
        raise InfeasiblePoint(f"No constrained equilibrium at angles {stepped.generation_angles}: {exc}") from exc
    except NumericalError as exc:
        logger.error(f"Constrained transition failed at angles {stepped.generation_angles}: {exc}")
        raise
    return system.solution(x, norm, iterations)


def equilibrium_residuals(problem: EquilibriumProblem, solution: EquilibriumSolution) -> Dict[str, float]:
    """
    Independent check of a solution with complex arithmetic S = V conj(Y V).

    Returns the worst nodal balance error, the worst droop-law error (DROOP mode) and
    the system power-balance residual.
    """
    net = problem.augmented
    loads = problem.load_table()
    vc = solution.v * np.exp(1j * solution.theta)
    s_inj = vc * np.conj(net.y_matrix @ vc)
    p_l, q_l = loads.evaluate(solution.v, solution.f)
    s_node = s_inj + p_l + 1j * q_l

    gen = np.zeros(net.n_node, dtype=complex)
    np.add.at(gen, net.inverter_node, solution.p_inv + 1j * solution.q_inv)
    balance = float(np.max(np.abs(s_node - gen)))

    droop = 0.0
    if problem.mode is Mode.DROOP:
        for k, unit in enumerate(problem.inverters):
            node = net.inverter_node[k]
            w_err = solution.f - (unit.f0 + unit.k_df * (unit.p0 - s_node[node].real) + unit.supp_w)
            v_err = solution.v[node] - (unit.v0 + unit.k_dv * (unit.q0 - s_node[node].imag) + unit.supp_v)
            droop = max(droop, abs(w_err), abs(v_err))
    else:
        p_gen, q_gen = problem.generation_targets()
        droop = float(np.max(np.abs(solution.p_inv - p_gen)) + np.max(np.abs(solution.q_inv - q_gen)))

    power_balance = float(np.sum(solution.p_inv) - np.sum(p_l) - net.losses(solution.v, solution.theta))
    return {"nodal": balance, "droop": droop, "power_balance": power_balance}
