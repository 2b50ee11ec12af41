"""VTK legacy and CSV writers for vertex fields and statistics tables."""

import csv

import numpy as np

from ..physics import SECONDS_PER_YEAR


def write_vtk(path, grid, fields, title="elderuq field"):
    """Write vertex fields as a legacy ASCII STRUCTURED_POINTS dataset.

    ``fields`` maps names to arrays of length ``grid.n_vertices``.  Vertex
    order (x fastest) matches the VTK point order.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        f"{title} nx={grid.nx} ny={grid.ny} Lx={grid.Lx:g} Ly={grid.Ly:g}"[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {grid.dx!r} {grid.dy!r} 1",
        f"POINT_DATA {grid.n_vertices}",
    ]
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.size != grid.n_vertices:
            raise ValueError(f"field {name!r} has {values.size} values, grid has {grid.n_vertices} vertices")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(" ".join(repr(float(v)) for v in chunk) for chunk in np.array_split(values, max(1, values.size // 8)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_scalars(path):
    """Minimal reader for files written by :func:`write_vtk` (used in tests)."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    out = {}
    dims = None
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("DIMENSIONS"):
            dims = tuple(int(v) for v in line.split()[1:])
        if line.startswith("POINT_DATA"):
            npts = int(line.split()[1])
        if line.startswith("SCALARS"):
            name = line.split()[1]
            i += 2
            vals = []
            while len(vals) < npts:
                vals.extend(float(v) for v in tokens[i].split())
                i += 1
            out[name] = np.array(vals)
            continue
        i += 1
    return dims, out


def write_field_csv(path, grid, fields):
    names = list(fields)
    cols = [np.asarray(fields[n], dtype=float) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", *names])
        for k in range(grid.n_vertices):
            w.writerow([repr(float(grid.x[k])), repr(float(grid.y[k]))] + [repr(float(c[k])) for c in cols])


STAT_COLUMNS = ["time_years", "x", "y", "mean", "std", "q025", "q25", "q50", "q75", "q975"]


def quantile_column(level):
    """Column name used in the statistics table: 0.025 -> q025, 0.5 -> q50."""
    s = f"{level:.6f}".split(".")[1].rstrip("0")
    return "q" + s.ljust(2, "0")


def write_statistics_csv(path, stats):
    """Table of mean, standard deviation and quantiles per point and time."""
    levels = stats[0].quantile_levels if stats else (0.025, 0.25, 0.5, 0.75, 0.975)
    header = ["time_years", "x", "y", "mean", "std"] + [quantile_column(a) for a in levels]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in stats:
            w.writerow([f"{s.time / SECONDS_PER_YEAR:.6g}", f"{s.x:g}", f"{s.y:g}",
                        repr(s.mean), repr(s.std)] + [repr(float(q)) for q in s.quantiles])
    return header


def write_exceedance_csv(path, stats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_years", "x", "y", "threshold", "probability"])
        for s in stats:
            for c, prob in s.exceedance:
                w.writerow([f"{s.time / SECONDS_PER_YEAR:.6g}", f"{s.x:g}", f"{s.y:g}", repr(c), repr(prob)])


def write_pdf_csv(path, centers, density):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "density"])
        for c, d in zip(centers, density):
            w.writerow([repr(float(c)), repr(float(d))])


def write_rule_csv(fh, rule):
    w = csv.writer(fh)
    w.writerow([f"theta_{j + 1}" for j in range(rule.dim)] + ["weight"])
    for node, wt in zip(rule.nodes, rule.weights):
        w.writerow([repr(float(v)) for v in node] + [repr(float(wt))])
