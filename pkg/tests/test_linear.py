from types import SimpleNamespace

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from elderuq.flow import linear
from elderuq.flow.assembly import Discretization, assemble
from elderuq.flow.linear import (
    ILU0,
    BlockJacobi,
    GeometricMultigrid,
    LinearSolverError,
    bicgstab,
    linear_solve,
    prolongation,
)
from elderuq.flow.solver import SolverControls
from elderuq.mesh import build_grid, tag_boundaries
from elderuq.physics import PhysicalParams


def poisson_2d(n):
    """Five-point Laplacian on an n x n point lattice with Dirichlet closure."""
    T = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n))
    eye = sp.identity(n)
    return (sp.kron(eye, T) + sp.kron(T, eye)).tocsr()


def flow_system(nx=32, ny=8, seed=0):
    rng = np.random.default_rng(seed)
    g = build_grid(nx, ny)
    disc = Discretization.build(g, tag_boundaries(g), PhysicalParams(), 0.1 + 0.01 * rng.uniform(-1, 1, g.n_vertices))
    x_old = disc.initial_state()
    x = disc.impose_dirichlet(x_old)
    x[0::2] += 0.3 * rng.random(g.n_vertices)
    R, J = assemble(disc, x, x_old, 0.007 * 3.1536e7)
    return g, J, -R


def test_identity_one_iteration(rng):
    b = rng.normal(size=50)
    x, info = bicgstab(sp.identity(50, format="csr"), b, tol=1e-12)
    np.testing.assert_allclose(x, b, rtol=1e-14)
    assert info["iterations"] <= 1 and info["converged"]


def test_zero_rhs():
    x, info = bicgstab(poisson_2d(5), np.zeros(25))
    assert np.all(x == 0) and info["converged"]


@pytest.mark.parametrize("kind", ["none", "ilu0", "multigrid"])
def test_poisson_33_matches_dense(kind, rng):
    n = 33
    A = poisson_2d(n)
    b = rng.normal(size=n * n)
    ref = np.linalg.solve(A.toarray(), b)
    M = {"none": None, "ilu0": ILU0(A), "multigrid": GeometricMultigrid(A, n - 1, n - 1, block=1)}[kind]
    x, info = bicgstab(A, b, M, tol=1e-12, maxiter=2000)
    assert info["converged"]
    np.testing.assert_allclose(x, ref, atol=1e-8 * np.abs(ref).max())
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b) * 1.0001


def test_multigrid_hierarchy():
    A = poisson_2d(33)
    mg = GeometricMultigrid(A, 32, 32, block=1)
    # 32x32 -> 16 -> 8 -> 4 cells: coarsening stops at 16 cells
    assert mg.n_levels == 4
    assert GeometricMultigrid(A, 32, 32, block=1, max_levels=2).n_levels == 2


def test_prolongation_reproduces_linear_functions():
    P, R = prolongation(4, 2, block=1)
    xc, yc = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 3))
    xf, yf = np.meshgrid(np.linspace(0, 1, 9), np.linspace(0, 1, 5))
    fc = (2 * xc - 3 * yc + 1).ravel()
    np.testing.assert_allclose(P @ fc, (2 * xf - 3 * yf + 1).ravel(), atol=1e-14)
    assert (R - P.T).nnz == 0


@pytest.mark.parametrize("kind", ["multigrid", "ilu0", "jacobi"])
def test_flow_jacobian_solves(kind):
    g, J, b = flow_system()
    ctl = SolverControls(preconditioner=kind, linear_max_iter=3000)
    x, info = linear_solve(J, b, ctl, g)
    ref = spla.spsolve(J.tocsc(), b)
    assert np.linalg.norm(J @ x - b) <= 1e-10 * np.linalg.norm(b) * 1.0001
    np.testing.assert_allclose(x, ref, rtol=1e-6, atol=1e-8 * np.abs(ref).max())
    assert info["preconditioner"] == kind


def test_multigrid_beats_unpreconditioned():
    g, J, b = flow_system(64, 16)
    ctl = SolverControls()
    _, mg = linear_solve(J, b, ctl, g)
    _, bj = linear_solve(J, b, SolverControls(preconditioner="jacobi", linear_max_iter=5000), g)
    assert mg["iterations"] < bj["iterations"]


@pytest.mark.parametrize("smoother", ["jacobi", "ilu0"])
def test_multigrid_smoothers(smoother):
    g, J, b = flow_system()
    _, info = linear_solve(J, b, SolverControls(smoother=smoother), g)
    assert info["converged"] and info["iterations"] < 40


def test_fallback_to_ilu0(monkeypatch):
    g, J, b = flow_system()
    real = linear.make_preconditioner

    def broken(kind, A, grid=None, controls=None):
        if kind == "multigrid":
            raise LinearSolverError("simulated breakdown")
        return real(kind, A, grid, controls)

    monkeypatch.setattr(linear, "make_preconditioner", broken)
    x, info = linear_solve(J, b, SolverControls(), g)
    assert info["preconditioner"] == "ilu0"
    assert np.linalg.norm(J @ x - b) <= 1e-10 * np.linalg.norm(b) * 1.0001


def test_failure_is_reported():
    g, J, b = flow_system()
    with pytest.raises(LinearSolverError):
        linear_solve(J, b, SolverControls(preconditioner="none", linear_max_iter=2), g)


def test_block_jacobi_inverts_diagonal_blocks(rng):
    blocks = [rng.normal(size=(2, 2)) + 3 * np.eye(2) for _ in range(6)]
    A = sp.block_diag(blocks, format="csr")
    r = rng.normal(size=12)
    np.testing.assert_allclose(BlockJacobi(A).apply(r), np.linalg.solve(A.toarray(), r), rtol=1e-12)
    with pytest.raises(LinearSolverError):
        BlockJacobi(sp.csr_matrix((4, 4)))


def test_ilu0_exact_on_tridiagonal(rng):
    A = sp.diags([-1.0, 4.0, -1.5], [-1, 0, 1], shape=(30, 30), format="csr")
    r = rng.normal(size=30)
    # no fill-in for a tridiagonal matrix, so ILU(0) is the exact LU
    np.testing.assert_allclose(ILU0(A).solve(r), np.linalg.solve(A.toarray(), r), rtol=1e-12)


def test_make_preconditioner_requires_grid():
    with pytest.raises(ValueError):
        linear.make_preconditioner("multigrid", poisson_2d(3))
    assert linear.make_preconditioner("none", poisson_2d(3)) is None
    _ = SimpleNamespace
