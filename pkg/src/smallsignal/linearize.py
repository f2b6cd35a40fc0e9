"""
Numerical linearization of the microgrid DAE and modal analysis.

x' = f(x, y),  0 = g(x, y)   ->   A = f_x - f_y g_y^-1 g_x
"""
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.linalg import eigvals, lu_factor, lu_solve, svd
from scipy.optimize import linear_sum_assignment

from config.settings import settings
from src.utils.errors import ConfigurationError, SingularAlgebraicBlock

DEFAULT_STEP = settings.fd_step
EQUILIBRIUM_TOL = 1e-8
SINGULAR_CONDITION = 1e12
# far past every enable ramp and limiter ramp
STEADY_TIME = 1e9


@dataclass
class LinearizedModel:
    f_x: np.ndarray
    f_y: np.ndarray
    g_x: np.ndarray
    g_y: np.ndarray
    state_labels: List[str] = field(default_factory=list)
    algebraic_labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        n, m = self.f_x.shape[0], self.g_y.shape[0]
        if self.f_x.shape != (n, n) or self.f_y.shape != (n, m):
            raise ConfigurationError("Inconsistent differential Jacobian blocks")
        if self.g_x.shape != (m, n) or self.g_y.shape != (m, m):
            raise ConfigurationError("Inconsistent algebraic Jacobian blocks")

    @property
    def n_states(self) -> int:
        return self.f_x.shape[0]

    def frozen_states(self) -> np.ndarray:
        """States whose derivative does not depend on anything: held integrators, the reference angle."""
        rows = np.hstack((self.f_x, self.f_y))
        return np.flatnonzero(np.all(rows == 0.0, axis=1))

    def without_frozen(self) -> "LinearizedModel":
        keep = np.setdiff1d(np.arange(self.n_states), self.frozen_states())
        return replace(
            self,
            f_x=self.f_x[np.ix_(keep, keep)],
            f_y=self.f_y[keep],
            g_x=self.g_x[:, keep],
            state_labels=[self.state_labels[k] for k in keep] if self.state_labels else [],
        )


def _step(value: float, h: float) -> float:
    return h * max(1.0, abs(value))


def linearize_dae(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x0: np.ndarray,
    y0: np.ndarray,
    h: float = DEFAULT_STEP,
    state_labels: Sequence[str] = (),
    algebraic_labels: Sequence[str] = (),
) -> LinearizedModel:
    """Central-difference Jacobians of a semi-explicit DAE."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    n, m = x0.size, y0.size
    f_x, g_x = np.zeros((n, n)), np.zeros((m, n))
    f_y, g_y = np.zeros((n, m)), np.zeros((m, m))

    for i in range(n):
        step = _step(x0[i], h)
        hi, lo = x0.copy(), x0.copy()
        hi[i] += step
        lo[i] -= step
        f_x[:, i] = (f(hi, y0) - f(lo, y0)) / (2 * step)
        if m:
            g_x[:, i] = (g(hi, y0) - g(lo, y0)) / (2 * step)
    for j in range(m):
        step = _step(y0[j], h)
        hi, lo = y0.copy(), y0.copy()
        hi[j] += step
        lo[j] -= step
        f_y[:, j] = (f(x0, hi) - f(x0, lo)) / (2 * step)
        g_y[:, j] = (g(x0, hi) - g(x0, lo)) / (2 * step)

    return LinearizedModel(f_x, f_y, g_x, g_y, list(state_labels), list(algebraic_labels))


def linearize(
    model,
    initial,
    h: float = DEFAULT_STEP,
    branch=None,
    drop_frozen: bool = True,
    t: float = STEADY_TIME,
) -> LinearizedModel:
    """
    Linearize a MicrogridModel at an initial condition (x, y, inputs).

    The piecewise branches are frozen at the selection active at the operating point
    unless ``branch`` overrides them.

    Args:
        model: The MicrogridModel to linearize.
        initial: Operating point from ``initialize``; its network is re-solved if off.
        h: Relative central-difference step.
        branch: Branch selection to freeze; defaults to the one active at the point.
        drop_frozen: Remove states whose derivative rows are identically zero.
        t: Evaluation time, past every regulator ramp.

    Returns:
        The DAE Jacobian blocks with state and algebraic labels.
    """
    inputs = initial.inputs
    x0, y0 = initial.x, initial.y
    branch = branch if branch is not None else model.branch_selection(x0, inputs)

    residual = model.g(x0, y0, t, inputs, branch)
    if residual.size and np.max(np.abs(residual)) > EQUILIBRIUM_TOL:
        y0 = model.solve_network(x0, t, inputs, y0, branch)

    lin = linearize_dae(
        lambda x, y: model.f(x, y, t, inputs, branch),
        lambda x, y: model.g(x, y, t, inputs, branch),
        x0, y0, h,
        model.state_labels,
        model.algebraic_labels(inputs),
    )
    if drop_frozen:
        dropped = lin.frozen_states()
        lin = lin.without_frozen()
        logger.debug(f"Linearized {lin.n_states} states ({len(dropped)} frozen dropped), "
                     f"{len(lin.algebraic_labels)} algebraic variables")
    return lin


def reduce_state_matrix(lin: LinearizedModel) -> np.ndarray:
    """Schur complement A = f_x - f_y g_y^-1 g_x."""
    if lin.g_y.size == 0:
        return lin.f_x.copy()
    condition = float(np.linalg.cond(lin.g_y))
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        _, _, vh = svd(lin.g_y)
        null_vector = vh[-1]
        labels = lin.algebraic_labels
        worst = labels[int(np.argmax(np.abs(null_vector)))] if labels else int(np.argmax(np.abs(null_vector)))
        raise SingularAlgebraicBlock(
            f"g_y is singular (condition {condition:.3e}); dominant null direction at {worst}",
            null_vector=null_vector,
            condition=condition,
        )
    logger.debug(f"g_y condition number {condition:.3e}")
    return lin.f_x - lin.f_y @ lu_solve(lu_factor(lin.g_y), lin.g_x)


def eigenvalues(a: np.ndarray) -> np.ndarray:
    """Full spectrum sorted by real part (descending), then imaginary part."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ConfigurationError("State matrix contains non-finite entries")
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    values = eigvals(a)
    order = np.lexsort((-values.imag, -values.real))
    return values[order]


def modal_table(values: np.ndarray, labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Eigenvalue, parts, natural frequency (Hz), damping ratio and time constant per mode."""
    values = np.asarray(values, dtype=complex)
    magnitude = np.abs(values)
    with np.errstate(divide="ignore", invalid="ignore"):
        damping = np.where(magnitude > 0, -values.real / magnitude, 1.0)
        tau = np.where(values.real != 0, -1.0 / values.real, np.inf)
    df = pd.DataFrame({
        "eigenvalue": values,
        "real": values.real,
        "imag": values.imag,
        "natural_frequency": magnitude / (2 * np.pi),
        "damping_ratio": damping,
        "time_constant": tau,
    })
    if labels is not None:
        df["label"] = list(labels)
    return df.sort_values(by="real", ascending=False, ignore_index=True)


def small_signal_stable(values: np.ndarray, margin: float = 0.0) -> bool:
    return bool(values.size == 0 or np.max(values.real) < -margin)


def pair_spectra(reference: np.ndarray, candidate: np.ndarray) -> Tuple[List[Tuple[int, int]], np.ndarray]:
    """
    Match two spectra by minimum total distance. Returns index pairs and the relative
    error of each pair (|a - b| / max(|a|, 1e-12)).
    """
    reference = np.asarray(reference, dtype=complex)
    candidate = np.asarray(candidate, dtype=complex)
    cost = np.abs(reference[:, None] - candidate[None, :])
    rows, cols = linear_sum_assignment(cost)
    errors = cost[rows, cols] / np.maximum(np.abs(reference[rows]), 1e-12)
    return list(zip(rows.tolist(), cols.tolist())), errors


def ringdown_modes(
    signals: np.ndarray,
    dt: float,
    n_modes: Optional[int] = None,
    rank_tol: float = 1e-6,
) -> np.ndarray:
    """
    Continuous-time modes of sampled free responses (matrix pencil).

    ``signals`` is (n_samples,) or (n_samples, n_channels); channels share the modes.
    The model order is ``n_modes`` or the numerical rank of the stacked Hankel matrix.
    """
    data = np.asarray(signals, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n_samples = data.shape[0]
    pencil = n_samples // 2
    if pencil < 2:
        raise ConfigurationError("Ring-down needs at least four samples")

    rows = n_samples - pencil
    idx = np.arange(rows)[:, None] + np.arange(pencil + 1)[None, :]
    hankel = np.vstack([data[idx, c] for c in range(data.shape[1])])
    _, s, vh = svd(hankel, full_matrices=False)
    if n_modes is None:
        n_modes = int(np.sum(s > rank_tol * s[0]))
    n_modes = max(1, min(n_modes, pencil))

    v = vh[:n_modes].conj().T
    z = eigvals(np.linalg.pinv(v[:-1]) @ v[1:])
    modes = np.log(z.astype(complex)) / dt
    order = np.lexsort((-modes.imag, -modes.real))
    return modes[order]
