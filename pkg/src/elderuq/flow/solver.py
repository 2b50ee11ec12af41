"""Newton iteration and time marching for one realization."""

from dataclasses import dataclass, field
import logging

import numpy as np

from ..physics import SECONDS_PER_YEAR
from .assembly import assemble, split
from .linear import LinearSolverError, linear_solve

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    """Newton did not converge for one time step."""


class RealizationFailure(RuntimeError):
    """A time step kept failing after the allowed number of step halvings."""


@dataclass(frozen=True)
class SolverControls:
    dt_years: float = 0.007
    t_end_years: float = 7.0
    newton_tol: float = 1e-8
    newton_abs_tol: float = 1e-13
    newton_max_iter: int = 25
    line_search_factor: float = 0.5
    line_search_max: int = 8
    linear_tol: float = 1e-10
    linear_max_iter: int = 400
    preconditioner: str = "multigrid"
    smoother: str = "jacobi"
    smoother_sweeps: int = 2
    smoother_omega: float = 0.8
    mg_levels: int = None
    max_halvings: int = 3

    def __post_init__(self):
        for name in ("dt_years", "newton_tol", "newton_abs_tol", "linear_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_end_years < 0:
            raise ValueError("t_end_years must be non-negative")
        if not 0 < self.line_search_factor < 1:
            raise ValueError("line_search_factor must lie in (0, 1)")
        if self.preconditioner not in ("multigrid", "ilu0", "jacobi", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.smoother not in ("jacobi", "ilu0"):
            raise ValueError(f"unknown smoother {self.smoother!r}")

    @property
    def dt(self):
        return self.dt_years * SECONDS_PER_YEAR


@dataclass
class FieldSnapshot:
    time: float  # seconds
    c: np.ndarray
    p: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def time_years(self):
        return self.time / SECONDS_PER_YEAR


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    converged: bool = False


def row_scaling(disc, dt):
    """Row weights that make residual entries dimensionless and O(1)."""
    prm = disc.params
    s = np.empty(disc.n_unknowns)
    s[0::2] = dt / (disc.grid.volumes * prm.density_pure)
    s[1::2] = s[0::2]
    dirichlet = disc.dirichlet_rows
    s[0::2][dirichlet[0::2]] = 1.0
    p_scale = prm.density_pure * max(prm.gravity, 1.0) * disc.grid.Ly
    s[1::2][dirichlet[1::2]] = 1.0 / p_scale
    return s


def newton_solve(disc, x_old, dt, controls, x0=None, report=None):
    """Advance one implicit Euler step; returns the new state vector.

    The reference residual is that of ``x_old`` with the Dirichlet data
    imposed, so it measures the interior balances only; iteration starts from
    that state unless ``x0`` is given.  It stops when the scaled residual
    norm falls below ``newton_tol`` times the reference or below
    ``newton_abs_tol``.  Raises :class:`StepFailure` on non-convergence.
    """
    if report is None:
        report = NewtonReport()
    if not np.all(np.isfinite(x_old)):
        raise StepFailure("non-finite previous state")
    scale = row_scaling(disc, dt)
    x = disc.impose_dirichlet(x_old)
    R, J = assemble(disc, x, x_old, dt)
    norm = np.linalg.norm(scale * R)
    target = max(controls.newton_tol * norm, controls.newton_abs_tol)
    if x0 is not None:
        x = np.array(x0, dtype=float)
        R, J = assemble(disc, x, x_old, dt)
        norm = np.linalg.norm(scale * R)
    report.residual_norms.append(norm)
    for it in range(controls.newton_max_iter + 1):
        if norm <= target:
            report.iterations = it
            report.converged = True
            return x
        if it == controls.newton_max_iter:
            break
        try:
            dx, info = linear_solve(J, -R, controls, disc.grid)
        except LinearSolverError as exc:
            raise StepFailure(str(exc)) from exc
        report.linear_iterations.append(info["iterations"])
        lam = 1.0
        for _trial in range(controls.line_search_max):
            x_try = x + lam * dx
            R_try, J_try = assemble(disc, x_try, x_old, dt)
            norm_try = np.linalg.norm(scale * R_try)
            if np.isfinite(norm_try) and norm_try <= (1.0 - 1e-4 * lam) * norm:
                break
            lam *= controls.line_search_factor
        else:
            # accept the shortest trial step only if it is not worse
            if not (np.isfinite(norm_try) and norm_try < norm):
                raise StepFailure(f"line search failed at Newton iteration {it + 1}")
        x, R, J, norm = x_try, R_try, J_try, norm_try
        report.residual_norms.append(norm)
    report.iterations = controls.newton_max_iter
    raise StepFailure(f"Newton did not converge in {controls.newton_max_iter} iterations "
                      f"(residual {norm:.3e}, target {target:.3e})")


def _step_with_retries(disc, x, dt, controls, halvings=0):
    try:
        return newton_solve(disc, x, dt, controls)
    except StepFailure as exc:
        if halvings >= controls.max_halvings:
            raise RealizationFailure(f"step of {dt:.4g} s failed after {halvings} halvings: {exc}") from exc
        log.info("step failed (%s); retrying with dt/2", exc)
        half = 0.5 * dt
        x = _step_with_retries(disc, x, half, controls, halvings + 1)
        return _step_with_retries(disc, x, half, controls, halvings + 1)


def time_march(disc, controls, output_times_years=None, theta=None, x_init=None, callback=None):
    """Integrate from the initial condition to ``t_end`` and return snapshots.

    Snapshots are taken at the initial time and at every requested output
    time (years); steps are shortened to land on output times exactly.
    ``callback(step_index, t, x_old, x_new, dt)`` is called after every
    accepted step.
    """
    theta = np.zeros(0) if theta is None else np.asarray(theta, dtype=float)
    t_end = controls.t_end_years * SECONDS_PER_YEAR
    if output_times_years is None:
        output_times_years = [controls.t_end_years]
    outs = sorted(float(t) * SECONDS_PER_YEAR for t in output_times_years)
    if outs and outs[-1] > t_end * (1 + 1e-12):
        raise ValueError("output time beyond t_end")
    outs = [t for t in outs if t > 0.0]
    x = disc.initial_state() if x_init is None else np.array(x_init, dtype=float)

    def snap(t, x):
        c, p = split(x)
        return FieldSnapshot(time=t, c=c.copy(), p=p.copy(), theta=theta.copy())

    snaps = [snap(0.0, x)]
    dt = controls.dt
    t = 0.0
    step = 0
    eps = 1e-9 * dt
    for t_out in outs:
        while t < t_out - eps:
            h = dt if t + dt < t_out - eps else t_out - t
            x_new = _step_with_retries(disc, x, h, controls)
            step += 1
            if callback is not None:
                callback(step, t + h, x, x_new, h)
            x = x_new
            t = t_out if h != dt else t + h
        snaps.append(snap(t_out, x))
    return snaps
