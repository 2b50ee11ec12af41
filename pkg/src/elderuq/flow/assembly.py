"""Implicit-Euler box-scheme residual and analytic Jacobian.

Unknowns are interleaved per vertex, ``[c_0, p_0, c_1, p_1, ...]``.  Row
``2v`` holds the salt balance of control volume ``v`` and row ``2v + 1`` its
liquid mass balance, so each 2x2 diagonal block pairs an equation with its
"natural" unknown.

Face fluxes use two-point gradients along the primal edge, arithmetic face
averages of density, permeability and porosity, and full upwinding of c in
the convective salt flux.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..physics import calibrate_kozeny_carman, permeability


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything the residual needs that does not change within a realization."""

    grid: object
    tags: object
    params: object
    phi: np.ndarray
    perm: np.ndarray
    inflow_concentration: float = 1.0

    @classmethod
    def build(cls, grid, tags, params, phi, inflow_concentration=1.0):
        closure = calibrate_kozeny_carman(params.mean_porosity, params.mean_permeability)
        phi = np.asarray(phi, dtype=float)
        return cls(grid, tags, params, phi, np.asarray(permeability(phi, closure)),
                   float(inflow_concentration))

    # per-face coefficients, cached lazily
    def __post_init__(self):
        g = self.grid
        a, b = g.face_a, g.face_b
        object.__setattr__(self, "_mobility", 0.5 * (self.perm[a] + self.perm[b]) / self.params.viscosity)
        object.__setattr__(self, "_phi_face", 0.5 * (self.phi[a] + self.phi[b]))
        # gravity component along the edge direction; edges point along +x or +y
        object.__setattr__(self, "_g_along", -self.params.gravity * g.face_normal[:, 1])
        object.__setattr__(self, "_pattern", _JacobianPattern(g))
        targets = np.where(self.tags.inflow, self.inflow_concentration, 0.0)
        object.__setattr__(self, "_c_target", targets)
        anchors = np.asarray(self.tags.anchors)
        object.__setattr__(self, "_anchors", anchors)

    @property
    def n_unknowns(self):
        return 2 * self.grid.n_vertices

    @property
    def dirichlet_rows(self):
        rows = np.zeros(self.n_unknowns, dtype=bool)
        rows[0::2] = self.tags.dirichlet_c
        rows[2 * self._anchors + 1] = True
        return rows

    def hydrostatic_pressure(self, rho=None):
        if rho is None:
            rho = self.params.density_pure
        return rho * self.params.gravity * (self.grid.Ly - self.grid.y)

    def impose_dirichlet(self, x):
        """Copy of ``x`` with the boundary concentrations and pressure anchors set."""
        x = np.array(x, dtype=float)
        d = self.tags.dirichlet_c
        x[0::2][d] = self._c_target[d]
        x[2 * self._anchors + 1] = 0.0
        return x

    def initial_state(self):
        """Pure water everywhere, hydrostatic pressure with the pure-water density."""
        x = np.zeros(self.n_unknowns)
        x[1::2] = self.hydrostatic_pressure()
        return x


def split(x):
    return x[0::2], x[1::2]


def join(c, p):
    x = np.empty(2 * c.size)
    x[0::2] = c
    x[1::2] = p
    return x


def _density(c, params):
    cc = np.clip(c, 0.0, 1.0)
    rho = params.density_pure + params.density_contrast * cc
    drho = np.where((c >= 0.0) & (c <= 1.0), params.density_contrast, 0.0)
    return rho, drho


class _JacobianPattern:
    """Fixed CSR sparsity of the Jacobian plus scatter maps for fast refill."""

    def __init__(self, grid):
        nv = grid.n_vertices
        a, b = grid.face_a, grid.face_b
        rows, cols = [], []
        # per face: blocks (a,a), (a,b), (b,a), (b,b), each 2x2 in (eq, var) order
        for r, c in ((a, a), (a, b), (b, a), (b, b)):
            for eq in (0, 1):
                for var in (0, 1):
                    rows.append(2 * r + eq)
                    cols.append(2 * c + var)
        # storage diagonal: salt/c, mass/c, plus identity slots for Dirichlet rows
        v = np.arange(nv)
        rows += [2 * v, 2 * v + 1, 2 * v, 2 * v + 1]
        cols += [2 * v, 2 * v, 2 * v, 2 * v + 1]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        n = 2 * nv
        coo = sp.coo_matrix((np.arange(1, rows.size + 1, dtype=float), (rows, cols)), shape=(n, n))
        csr = coo.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        # locate every COO entry inside the CSR data array
        self.indptr = csr.indptr
        self.indices = csr.indices
        key = rows.astype(np.int64) * n + cols
        csr_rows = np.repeat(np.arange(n), np.diff(csr.indptr))
        csr_key = csr_rows.astype(np.int64) * n + csr.indices
        self.scatter = np.searchsorted(csr_key, key)
        self.entry_rows = rows
        self.shape = (n, n)
        self.nnz = csr.indices.size

    def matrix(self, values):
        data = np.bincount(self.scatter, weights=values, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


def _check_finite(x, name):
    bad = ~np.isfinite(x)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise AssemblyError(f"non-finite {name} at vertex {idx // 2} (unknown {idx})")


def assemble(disc, x, x_old, dt, jacobian=True):
    """Residual (and optionally Jacobian) of one implicit Euler step.

    Returns ``(R, J)``; ``J`` is ``None`` when ``jacobian`` is false.  Rows of
    Dirichlet vertices and pressure anchors hold ``value - target``.
    """
    if not dt > 0:
        raise AssemblyError("time step must be positive")
    _check_finite(x, "state")
    _check_finite(x_old, "previous state")
    g = disc.grid
    prm = disc.params
    a, b = g.face_a, g.face_b
    c, p = split(x)
    c_old, _ = split(x_old)
    rho, drho = _density(c, prm)
    rho_old, _ = _density(c_old, prm)
    vol_phi = g.volumes * disc.phi / dt

    # storage
    Rs = vol_phi * (rho * c - rho_old * c_old)
    Rm = vol_phi * (rho - rho_old)

    # face fluxes, from a to b
    h = g.face_distance
    ell = g.face_length
    lam = disc._mobility
    gt = disc._g_along
    rho_f = 0.5 * (rho[a] + rho[b])
    u = -lam * ((p[b] - p[a]) / h - rho_f * gt)
    upwind = u >= 0.0
    c_up = np.where(upwind, c[a], c[b])
    diff = ell * disc._phi_face * prm.molecular_diffusion / h
    grad_c = c[b] - c[a]

    Fm = ell * rho_f * u
    Fs = ell * rho_f * c_up * u - diff * rho_f * grad_c

    nv = g.n_vertices
    Rm += np.bincount(a, Fm, nv) - np.bincount(b, Fm, nv)
    Rs += np.bincount(a, Fs, nv) - np.bincount(b, Fs, nv)

    R = join(Rs, Rm)
    dir_rows = disc.dirichlet_rows
    R[0::2][disc.tags.dirichlet_c] = (c - disc._c_target)[disc.tags.dirichlet_c]
    R[2 * disc._anchors + 1] = p[disc._anchors]

    if not jacobian:
        return R, None

    # derivatives of u and rho_f with respect to the four face unknowns
    du_pa = lam / h
    du_pb = -lam / h
    drf_ca = 0.5 * drho[a]
    drf_cb = 0.5 * drho[b]
    du_ca = lam * gt * drf_ca
    du_cb = lam * gt * drf_cb

    dFm_ca = ell * (drf_ca * u + rho_f * du_ca)
    dFm_cb = ell * (drf_cb * u + rho_f * du_cb)
    dFm_pa = ell * rho_f * du_pa
    dFm_pb = ell * rho_f * du_pb

    conv = ell * c_up * u
    dFs_ca = (drf_ca * conv + ell * rho_f * (upwind * u + c_up * du_ca)
              - diff * (drf_ca * grad_c - rho_f))
    dFs_cb = (drf_cb * conv + ell * rho_f * ((~upwind) * u + c_up * du_cb)
              - diff * (drf_cb * grad_c + rho_f))
    dFs_pa = ell * rho_f * c_up * du_pa
    dFs_pb = ell * rho_f * c_up * du_pb

    # block (row vertex, column vertex) -> (salt/c, salt/p, mass/c, mass/p)
    face_vals = [
        (dFs_ca, dFs_pa, dFm_ca, dFm_pa),        # (a, a)
        (dFs_cb, dFs_pb, dFm_cb, dFm_pb),        # (a, b)
        (-dFs_ca, -dFs_pa, -dFm_ca, -dFm_pa),    # (b, a)
        (-dFs_cb, -dFs_pb, -dFm_cb, -dFm_pb),    # (b, b)
    ]
    vals = [v for block in face_vals for v in block]
    vals += [vol_phi * (drho * c + rho), vol_phi * drho, np.zeros(nv), np.zeros(nv)]
    vals = np.concatenate(vals)
    pat = disc._pattern
    vals[dir_rows[pat.entry_rows]] = 0.0
    # identity slots are the last 2 * nv entries
    ident = vals[-2 * nv:]
    ident[:nv] = dir_rows[0::2]
    ident[nv:] = dir_rows[1::2]
    return R, pat.matrix(vals)


def residual(disc, x, x_old, dt):
    return assemble(disc, x, x_old, dt, jacobian=False)[0]


def unconstrained_salt_residual(disc, x, x_old, dt):
    """Salt balance of every control volume, including Dirichlet vertices.

    The sum over all vertices equals the change of total salt mass per unit
    time, since interior fluxes telescope; at Dirichlet vertices the balance
    is the salt flux entering through the boundary.
    """
    g = disc.grid
    prm = disc.params
    a, b = g.face_a, g.face_b
    c, p = split(x)
    c_old, _ = split(x_old)
    rho, _ = _density(c, prm)
    rho_old, _ = _density(c_old, prm)
    Rs = g.volumes * disc.phi / dt * (rho * c - rho_old * c_old)
    h = g.face_distance
    rho_f = 0.5 * (rho[a] + rho[b])
    u = -disc._mobility * ((p[b] - p[a]) / h - rho_f * disc._g_along)
    c_up = np.where(u >= 0.0, c[a], c[b])
    Fs = g.face_length * rho_f * (c_up * u - disc._phi_face * prm.molecular_diffusion * (c[b] - c[a]) / h)
    nv = g.n_vertices
    return Rs + np.bincount(a, Fs, nv) - np.bincount(b, Fs, nv)


def salt_balance_error(disc, x, x_old, dt):
    """Global salt imbalance of one step relative to the salt mass.

    Salt enters only through the Dirichlet control volumes, so the change of
    total mass minus that inflow is the sum of the interior balances.
    """
    R = unconstrained_salt_residual(disc, x, x_old, dt)
    free = ~disc.tags.dirichlet_c
    scale = max(salt_mass(disc, x), salt_mass(disc, x_old), np.finfo(float).tiny)
    return abs(dt * R[free].sum()) / scale


def salt_mass(disc, x):
    c, _ = split(x)
    rho, _ = _density(c, disc.params)
    return float(np.sum(disc.grid.volumes * disc.phi * rho * c))


def face_velocity(disc, x):
    """Normal Darcy flux on every dual face (m/s, positive from face_a to face_b)."""
    g = disc.grid
    c, p = split(x)
    rho, _ = _density(c, disc.params)
    rho_f = 0.5 * (rho[g.face_a] + rho[g.face_b])
    return -disc._mobility * ((p[g.face_b] - p[g.face_a]) / g.face_distance - rho_f * disc._g_along)
