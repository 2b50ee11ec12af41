"""Preconditioned BiCGStab with geometric multigrid, ILU(0) and block-Jacobi preconditioners.

The systems come from the coupled (c, p) box scheme with interleaved
unknowns, so the Jacobi-type smoothers act on 2x2 vertex blocks.
"""

import functools
import logging

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class LinearSolverError(RuntimeError):
    pass


def bicgstab(A, b, M=None, x0=None, tol=1e-10, maxiter=500, atol=0.0):
    """Right-preconditioned BiCGStab.

    ``M`` is any object with a ``solve(r)`` method approximating ``A^{-1} r``.
    Returns ``(x, info)`` where ``info`` holds the iteration count, the
    relative residual and a ``converged`` flag.  Breakdown is reported through
    ``info['breakdown']`` rather than raised, so callers can switch methods.
    """
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    prec = (lambda v: v) if M is None else M.solve
    bnorm = np.linalg.norm(b)
    info = {"iterations": 0, "converged": False, "breakdown": False, "rel_residual": 0.0}
    if bnorm == 0.0:
        info["converged"] = True
        return np.zeros(n), info
    r = b - A @ x if x0 is not None else b.copy()
    threshold = max(tol * bnorm, atol)
    rnorm = np.linalg.norm(r)
    info["rel_residual"] = rnorm / bnorm
    if rnorm <= threshold:
        info["converged"] = True
        return x, info
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    tiny = np.finfo(float).tiny
    restarts = 0
    for it in range(1, maxiter + 1):
        rho_new = r_hat @ r
        if abs(rho_new) < 1e-30 * (r_hat @ r_hat) or omega == 0.0:
            # shadow residual orthogonal to r: restart with the current residual
            if restarts >= 5:
                info["breakdown"] = True
                break
            restarts += 1
            r_hat = r.copy()
            rho = alpha = omega = 1.0
            v = np.zeros(n)
            p = np.zeros(n)
            rho_new = r_hat @ r
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        p_hat = prec(p)
        v = A @ p_hat
        denom = r_hat @ v
        if abs(denom) < tiny:
            info["breakdown"] = True
            break
        alpha = rho / denom
        s = r - alpha * v
        x += alpha * p_hat
        snorm = np.linalg.norm(s)
        info["iterations"] = it
        if snorm <= threshold:
            r = s
            rnorm = snorm
            info["converged"] = True
            break
        s_hat = prec(s)
        t = A @ s_hat
        tt = t @ t
        if tt == 0.0:
            info["breakdown"] = True
            break
        omega = (t @ s) / tt
        x += omega * s_hat
        r = s - omega * t
        rnorm = np.linalg.norm(r)
        if not np.isfinite(rnorm):
            info["breakdown"] = True
            break
        if rnorm <= threshold:
            info["converged"] = True
            break
    # the recursively updated residual can drift; report the true one
    true_r = np.linalg.norm(b - A @ x)
    info["rel_residual"] = true_r / bnorm
    info["converged"] = bool(true_r <= max(threshold, 0.0) * 1.0001 and np.isfinite(true_r))
    return x, info


class BlockJacobi:
    """Inverse of the diagonal vertex blocks (2x2, or scalar with ``block=1``), optionally damped."""

    def __init__(self, A, omega=1.0, block=2):
        A = A.tocsr()
        self.A = A
        self.omega = omega
        self.block = block
        d0 = A.diagonal()
        if block == 1:
            if np.any(d0 == 0.0):
                raise LinearSolverError("zero diagonal entry")
            self.inv = 1.0 / d0
            return
        a = d0[0::2]
        d = d0[1::2]
        b = A.diagonal(1)[0::2]
        c = A.diagonal(-1)[0::2]
        det = a * d - b * c
        if np.any(det == 0.0):
            raise LinearSolverError("singular diagonal block")
        self.inv = np.stack([d / det, -b / det, -c / det, a / det], axis=1)

    def apply(self, r):
        if self.block == 1:
            return self.inv * r
        r0 = r[0::2]
        r1 = r[1::2]
        out = np.empty_like(r)
        out[0::2] = self.inv[:, 0] * r0 + self.inv[:, 1] * r1
        out[1::2] = self.inv[:, 2] * r0 + self.inv[:, 3] * r1
        return out

    def solve(self, r):
        return self.omega * self.apply(r)

    def smooth(self, x, b, sweeps):
        A = self.A
        if self.block == 1:
            for _ in range(sweeps):
                x = x + self.omega * self.inv * (b - A @ x)
            return x
        return _block_jacobi_sweeps(A.indptr, A.indices, A.data, self.inv, x, b, self.omega, sweeps)


@numba.njit(cache=True)
def _block_jacobi_sweeps(indptr, indices, data, inv, x, b, omega, sweeps):
    n = b.size
    x = x.copy()
    r = np.empty(n)
    for _ in range(sweeps):
        for i in range(n):
            s = b[i]
            for jj in range(indptr[i], indptr[i + 1]):
                s -= data[jj] * x[indices[jj]]
            r[i] = s
        for v in range(n // 2):
            r0 = r[2 * v]
            r1 = r[2 * v + 1]
            x[2 * v] += omega * (inv[v, 0] * r0 + inv[v, 1] * r1)
            x[2 * v + 1] += omega * (inv[v, 2] * r0 + inv[v, 3] * r1)
    return x


@numba.njit(cache=True)
def _ilu0_factor(indptr, indices, data):
    n = indptr.size - 1
    lu = data.copy()
    diag = np.empty(n, dtype=np.int64)
    pos = -np.ones(n, dtype=np.int64)
    for i in range(n):
        diag[i] = -1
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] == i:
                diag[i] = jj
        if diag[i] < 0:
            return lu, diag, False
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = jj
        for kk in range(indptr[i], indptr[i + 1]):
            k = indices[kk]
            if k >= i:
                break
            piv = lu[diag[k]]
            if piv == 0.0:
                return lu, diag, False
            lu[kk] /= piv
            lik = lu[kk]
            for jj in range(diag[k] + 1, indptr[k + 1]):
                q = pos[indices[jj]]
                if q >= 0:
                    lu[q] -= lik * lu[jj]
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = -1
        if lu[diag[i]] == 0.0:
            return lu, diag, False
    return lu, diag, True


@numba.njit(cache=True)
def _ilu0_solve(indptr, indices, lu, diag, r):
    n = r.size
    y = r.copy()
    for i in range(n):
        s = y[i]
        for jj in range(indptr[i], diag[i]):
            s -= lu[jj] * y[indices[jj]]
        y[i] = s
    for i in range(n - 1, -1, -1):
        s = y[i]
        for jj in range(diag[i] + 1, indptr[i + 1]):
            s -= lu[jj] * y[indices[jj]]
        y[i] = s / lu[diag[i]]
    return y


class ILU0:
    """Incomplete LU factorisation without fill on the sparsity of A."""

    def __init__(self, A, omega=1.0):
        A = A.tocsr()
        A.sort_indices()
        self.A = A
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        self.lu, self.diag, ok = _ilu0_factor(self.indptr, self.indices, A.data.astype(float))
        if not ok:
            raise LinearSolverError("zero pivot in ILU(0)")
        self.omega = omega

    def solve(self, r):
        return _ilu0_solve(self.indptr, self.indices, self.lu, self.diag, np.ascontiguousarray(r, dtype=float))

    def smooth(self, x, b, sweeps):
        for _ in range(sweeps):
            x = x + self.omega * self.solve(b - self.A @ x)
        return x


def _prolongation_1d(nc):
    nf = 2 * nc
    rows, cols, vals = [], [], []
    for i in range(nf + 1):
        if i % 2 == 0:
            rows.append(i); cols.append(i // 2); vals.append(1.0)
        else:
            rows += [i, i]; cols += [i // 2, i // 2 + 1]; vals += [0.5, 0.5]
    return sp.csr_matrix((vals, (rows, cols)), shape=(nf + 1, nc + 1))


@functools.lru_cache(maxsize=32)
def prolongation(nx_coarse, ny_coarse, block=2):
    """Bilinear vertex prolongation for a structured grid, repeated per unknown.

    Returns ``(P, P^T)`` as CSR matrices; results are cached and must not be
    modified.
    """
    P = sp.kron(_prolongation_1d(ny_coarse), _prolongation_1d(nx_coarse), format="csr")
    if block > 1:
        P = sp.kron(P, sp.identity(block), format="csr")
    return P, P.T.tocsr()


class GeometricMultigrid:
    """V-cycle on the nested hierarchy of a structured vertex grid.

    Coarse operators are Galerkin products ``P^T A P``; the coarsest level is
    solved directly.  ``smoother`` is ``"jacobi"`` (damped 2x2 block Jacobi)
    or ``"ilu0"``.
    """

    def __init__(self, A, nx, ny, smoother="jacobi", pre_sweeps=2, post_sweeps=2,
                 omega=0.8, coarsest_cells=16, max_levels=None, block=2):
        self.pre = pre_sweeps
        self.post = post_sweeps
        self.levels = []
        A = A.tocsr()
        while True:
            can_coarsen = (nx % 2 == 0 and ny % 2 == 0 and nx * ny > coarsest_cells
                           and min(nx, ny) >= 2
                           and (max_levels is None or len(self.levels) + 1 < max_levels))
            if not can_coarsen:
                break
            if smoother == "jacobi":
                sm = BlockJacobi(A, omega, block)
            elif smoother == "ilu0":
                sm = ILU0(A, 1.0 if omega == 0.8 else omega)
            else:
                raise ValueError(f"unknown smoother {smoother!r}")
            P, R = prolongation(nx // 2, ny // 2, block)
            self.levels.append((A, sm, P, R))
            A = (R @ (A @ P)).tocsr()
            nx, ny = nx // 2, ny // 2
        self.coarse = spla.splu(A.tocsc())
        self.n_levels = len(self.levels) + 1

    def _cycle(self, lvl, b):
        if lvl == len(self.levels):
            return self.coarse.solve(b)
        A, sm, P, R = self.levels[lvl]
        x = sm.smooth(np.zeros_like(b), b, self.pre) if self.pre else np.zeros_like(b)
        r = b - A @ x
        x = x + P @ self._cycle(lvl + 1, R @ r)
        if self.post:
            x = sm.smooth(x, b, self.post)
        return x

    def solve(self, r):
        return self._cycle(0, np.asarray(r, dtype=float))


def make_preconditioner(kind, A, grid=None, controls=None):
    if kind == "multigrid":
        if grid is None:
            raise ValueError("multigrid needs the structured grid")
        kw = {}
        if controls is not None:
            kw = dict(smoother=controls.smoother, pre_sweeps=controls.smoother_sweeps,
                      post_sweeps=controls.smoother_sweeps, omega=controls.smoother_omega,
                      max_levels=controls.mg_levels)
        return GeometricMultigrid(A, grid.nx, grid.ny, **kw)
    if kind == "ilu0":
        return ILU0(A)
    if kind == "jacobi":
        return BlockJacobi(A)
    if kind == "none":
        return None
    raise ValueError(f"unknown preconditioner {kind!r}")


def linear_solve(A, b, controls, grid=None, x0=None):
    """Solve ``A x = b`` to ``controls.linear_tol`` with fallback multigrid -> ILU(0).

    Raises :class:`LinearSolverError` if every preconditioner fails.
    """
    chain = [controls.preconditioner]
    if controls.preconditioner == "multigrid":
        chain.append("ilu0")
    last = None
    for kind in chain:
        try:
            M = make_preconditioner(kind, A, grid, controls)
        except LinearSolverError as exc:
            log.debug("preconditioner %s failed to build: %s", kind, exc)
            last = {"error": str(exc)}
            continue
        x, info = bicgstab(A, b, M, x0=x0, tol=controls.linear_tol, maxiter=controls.linear_max_iter)
        info["preconditioner"] = kind
        if info["converged"]:
            return x, info
        log.debug("BiCGStab with %s did not converge: %s", kind, info)
        last = info
    raise LinearSolverError(f"linear solve failed: {last}")
