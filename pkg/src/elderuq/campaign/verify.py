"""Quick invariant checks runnable from the command line (``elderuq verify``)."""

import numpy as np

from .. import gpc
from ..flow.assembly import Discretization, assemble, salt_balance_error
from ..flow.solver import SolverControls, time_march
from ..mesh import build_grid, tag_boundaries
from ..physics import PhysicalParams
from ..quadrature import clenshaw_curtis_1d, gauss_legendre_1d, halton_unit, radical_inverse, smolyak_sparse


def _sparse_counts():
    n3, n5 = smolyak_sparse(3, 3).size, smolyak_sparse(5, 3).size
    return n3 == 69 and n5 == 241, f"M=3 -> {n3}, M=5 -> {n5}"


def _orthogonality():
    gl = gauss_legendre_1d(64)
    tab = gpc.legendre_table(10, gl.nodes[:, 0])
    gram = (tab * gl.weights) @ tab.T / 2.0
    err = np.abs(gram - np.diag(1.0 / (2 * np.arange(11) + 1))).max()
    return err <= 1e-12, f"max error {err:.2e}"


def _quadrature_sums():
    err = max(abs(clenshaw_curtis_1d(l).weights.sum() - 2.0) for l in range(8))
    ok = err <= 1e-13
    h = halton_unit(3, 10)
    ref = np.array([[radical_inverse(i, b) for b in (2, 3, 5)] for i in range(1, 11)])
    ok = ok and np.array_equal(h, ref)
    return ok, f"CC weight-sum error {err:.1e}, Halton oracle {'match' if np.array_equal(h, ref) else 'MISMATCH'}"


def _projection():
    rule = smolyak_sparse(3, 3)
    iset = gpc.build_multi_index_set(3, 3)
    f = rule.nodes[:, 0] ** 2
    model = gpc.project_coefficients(f[:, None, None], rule, iset)
    var = model.variance()[0, 0]
    return abs(var - 4.0 / 45.0) <= 1e-12, f"Var(theta_1^2) = {var:.15f}"


def _hydrostatic():
    grid = build_grid(8, 4)
    tags = tag_boundaries(grid)
    params = PhysicalParams()
    disc = Discretization.build(grid, tags, params, np.full(grid.n_vertices, 0.1), inflow_concentration=0.0)
    ctl = SolverControls(dt_years=0.01, t_end_years=0.2)
    snaps = time_march(disc, ctl)
    cmax = np.abs(snaps[-1].c).max()
    return cmax <= 1e-10, f"max |c| after 20 steps {cmax:.1e}"


def _salt_balance():
    grid = build_grid(8, 4)
    tags = tag_boundaries(grid)
    disc = Discretization.build(grid, tags, PhysicalParams(), np.full(grid.n_vertices, 0.1))
    x = disc.initial_state()
    ctl = SolverControls(dt_years=0.02, t_end_years=0.1)
    worst = []

    def cb(step, t, x_old, x_new, dt):
        worst.append(salt_balance_error(disc, x_new, x_old, dt))

    time_march(disc, ctl, x_init=x, callback=cb)
    return max(worst) <= 1e-8, f"max relative imbalance {max(worst):.1e}"


def _jacobian():
    grid = build_grid(4, 4)
    tags = tag_boundaries(grid)
    rng = np.random.default_rng(1)
    disc = Discretization.build(grid, tags, PhysicalParams(), 0.1 + 0.01 * rng.random(grid.n_vertices))
    x = disc.initial_state()
    x[0::2] = 0.2 + 0.6 * rng.random(grid.n_vertices)
    dt = 0.01 * 3.1536e7
    _, J = assemble(disc, x, x, dt)
    J = J.toarray()
    scale = np.where(np.arange(x.size) % 2 == 0, 1e-6, 1e-6 * 1e3)
    fd = np.empty_like(J)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = scale[k]
        rp, _ = assemble(disc, x + e, x, dt, jacobian=False)
        rm, _ = assemble(disc, x - e, x, dt, jacobian=False)
        fd[:, k] = (rp - rm) / (2 * scale[k])
    err = np.abs(fd - J).max() / np.abs(J).max()
    return err <= 1e-6, f"relative max deviation {err:.1e}"


CHECKS = [
    ("sparse-grid counts", _sparse_counts),
    ("Legendre orthogonality", _orthogonality),
    ("quadrature weights / Halton", _quadrature_sums),
    ("projection of theta_1^2", _projection),
    ("hydrostatic rest state", _hydrostatic),
    ("salt balance", _salt_balance),
    ("analytic Jacobian", _jacobian),
]


def run_checks(out=print):
    failures = 0
    for name, fn in CHECKS:
        ok, detail = fn()
        failures += not ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return failures
