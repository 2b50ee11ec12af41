"""Structured quadrilateral grids with vertex-centred (box) control volumes.

Vertices are numbered row by row, ``v = j * (nx + 1) + i`` with ``i`` along x
and ``j`` along y (``y = 0`` is the bottom).  Every primal edge between two
neighbouring vertices owns one dual face; its length is the sum of the two
half-cell widths on either side of the edge.
"""

from dataclasses import dataclass, field

import numpy as np

# boundary tag values
NO_FLUX = 0
TOP_INFLOW = 1
BOTTOM = 2


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StructuredGrid:
    nx: int
    ny: int
    Lx: float
    Ly: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    volumes: np.ndarray = field(repr=False)
    # dual faces, one per primal edge; the normal points from face_a to face_b
    face_a: np.ndarray = field(repr=False)
    face_b: np.ndarray = field(repr=False)
    face_length: np.ndarray = field(repr=False)
    face_normal: np.ndarray = field(repr=False)
    face_midpoint: np.ndarray = field(repr=False)
    face_distance: np.ndarray = field(repr=False)

    @property
    def dx(self):
        return self.Lx / self.nx

    @property
    def dy(self):
        return self.Ly / self.ny

    @property
    def n_vertices(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def n_faces(self):
        return self.face_a.size

    @property
    def shape(self):
        """Shape of a vertex array reshaped as (ny + 1, nx + 1)."""
        return (self.ny + 1, self.nx + 1)

    def vertex_index(self, i, j):
        return j * (self.nx + 1) + i

    def nearest_vertex(self, x, y):
        i = int(np.clip(round(x / self.dx), 0, self.nx))
        j = int(np.clip(round(y / self.dy), 0, self.ny))
        return self.vertex_index(i, j)

    def coarsen(self):
        if self.nx % 2 or self.ny % 2:
            raise GridError("grid cannot be coarsened: odd cell count")
        return build_grid(self.nx // 2, self.ny // 2, self.Lx, self.Ly)


def build_grid(nx, ny, Lx=600.0, Ly=150.0):
    """Uniform tensor grid of nx x ny quadrilaterals on (0, Lx) x (0, Ly)."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise GridError(f"cell counts must be positive integers, got {nx}x{ny}")
    if not (Lx > 0 and Ly > 0):
        raise GridError(f"domain extents must be positive, got {Lx}x{Ly}")
    nx, ny = int(nx), int(ny)
    dx, dy = Lx / nx, Ly / ny
    i = np.arange(nx + 1)
    j = np.arange(ny + 1)
    X, Y = np.meshgrid(i * dx, j * dy)
    wx = np.where((i == 0) | (i == nx), 0.5, 1.0)
    wy = np.where((j == 0) | (j == ny), 0.5, 1.0)
    volumes = np.outer(wy * dy, wx * dx).ravel()

    vid = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    # x-directed edges: (i, j) -> (i + 1, j)
    ha = vid[:, :-1].ravel()
    hb = vid[:, 1:].ravel()
    hlen = np.repeat(wy * dy, nx)
    # y-directed edges: (i, j) -> (i, j + 1)
    va = vid[:-1, :].ravel()
    vb = vid[1:, :].ravel()
    vlen = np.tile(wx * dx, ny)

    x = X.ravel()
    y = Y.ravel()
    face_a = np.concatenate([ha, va])
    face_b = np.concatenate([hb, vb])
    normal = np.concatenate([np.tile([1.0, 0.0], (ha.size, 1)),
                             np.tile([0.0, 1.0], (va.size, 1))])
    mid = np.column_stack([0.5 * (x[face_a] + x[face_b]), 0.5 * (y[face_a] + y[face_b])])
    dist = np.concatenate([np.full(ha.size, dx), np.full(va.size, dy)])
    return StructuredGrid(
        nx=nx, ny=ny, Lx=float(Lx), Ly=float(Ly), x=x, y=y, volumes=volumes,
        face_a=face_a, face_b=face_b, face_length=np.concatenate([hlen, vlen]),
        face_normal=normal, face_midpoint=mid, face_distance=dist,
    )


@dataclass(frozen=True, eq=False)
class BoundaryTags:
    tags: np.ndarray
    anchors: tuple

    @property
    def inflow(self):
        return self.tags == TOP_INFLOW

    @property
    def bottom(self):
        return self.tags == BOTTOM

    @property
    def dirichlet_c(self):
        return self.tags != NO_FLUX


def tag_boundaries(grid, inflow_x_range=(150.0, 450.0)):
    """Tag the salt inflow segment on top, the bottom boundary, and the pressure anchors.

    Top vertices with x inside the closed ``inflow_x_range`` receive c = 1, the
    whole bottom row receives c = 0, everything else is no-flux.  The two upper
    corners anchor the pressure.
    """
    lo, hi = (float(v) for v in inflow_x_range)
    eps = 1e-9 * grid.Lx
    if hi < lo:
        raise GridError(f"empty inflow range [{lo}, {hi}]")
    if lo < -eps or hi > grid.Lx + eps:
        raise GridError(f"inflow range [{lo}, {hi}] outside [0, {grid.Lx}]")
    tags = np.full(grid.n_vertices, NO_FLUX, dtype=np.int8)
    row = np.arange(grid.nx + 1)
    tags[grid.vertex_index(row, 0)] = BOTTOM
    top = grid.vertex_index(row, grid.ny)
    xt = grid.x[top]
    hit = (xt >= lo - eps) & (xt <= hi + eps)
    if not hit.any():
        raise GridError(f"inflow range [{lo}, {hi}] contains no top vertex")
    tags[top[hit]] = TOP_INFLOW
    anchors = (grid.vertex_index(0, grid.ny), grid.vertex_index(grid.nx, grid.ny))
    return BoundaryTags(tags=tags, anchors=anchors)
