"""Plan, run and post-process a campaign of independent realizations."""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
import logging
import os
import time

import numpy as np

from .. import gpc
from ..flow.assembly import Discretization
from ..flow.solver import RealizationFailure, time_march
from ..mesh import build_grid, tag_boundaries
from ..physics import SECONDS_PER_YEAR
from ..porosity import porosity_on_grid
from ..quadrature import build_rule
from . import io
from .store import DONE, FAILED, RealizationStore, write_realization

log = logging.getLogger(__name__)


class CampaignError(RuntimeError):
    pass


def make_grid(cfg):
    g = cfg.grid
    grid = build_grid(g.nx, g.ny, g.Lx, g.Ly)
    return grid, tag_boundaries(grid, g.inflow_x_range)


def make_discretization(cfg, theta, grid=None, tags=None):
    if grid is None:
        grid, tags = make_grid(cfg)
    phi = porosity_on_grid(cfg.porosity, grid, theta)
    return Discretization.build(grid, tags, cfg.physics, phi, cfg.grid.inflow_concentration)


def solve_realization(cfg, theta):
    """Deterministic solve for one parameter vector; returns the snapshots."""
    theta = np.asarray(theta, dtype=float)
    disc = make_discretization(cfg, theta)
    snaps = time_march(disc, cfg.solver, cfg.snapshots_years, theta=theta)
    # the initial state is only stored when explicitly requested
    keep = list(snaps[1:])
    if any(t == 0.0 for t in cfg.snapshots_years):
        keep = [snaps[0]] + keep
    return disc, keep


def stochastic_rule(cfg):
    st = cfg.stochastic
    return build_rule(st.dim, st.rule, level=st.level, n=st.n)


def plan_campaign(cfg):
    """Write the manifest (if absent) and return the ``(index, theta)`` list."""
    rule = stochastic_rule(cfg)
    store = RealizationStore(cfg.output_dir)
    info = {**rule.describe(), "method": cfg.stochastic.method}
    if store.exists():
        store.load()
        if store.manifest["config_hash"] != cfg.numerics_hash():
            raise CampaignError(f"{store.manifest_path} belongs to a different configuration; "
                                "use a fresh output directory")
    else:
        store.create(cfg.numerics_hash(), info, rule.nodes, rule.weights)
    return [(i, rule.nodes[i].copy()) for i in range(rule.size)]


def _worker(cfg, index, theta, path):
    t0 = time.perf_counter()
    try:
        disc, snaps = solve_realization(cfg, theta)
    except (RealizationFailure, ValueError, ArithmeticError) as exc:
        return index, FAILED, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0
    write_realization(path, snaps, disc.grid, theta)
    return index, DONE, "", time.perf_counter() - t0


@dataclass
class RunReport:
    solved: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    seconds: float = 0.0


def run_campaign(cfg, workers=None, max_new=None):
    """Run every pending realization; completed nodes are skipped.

    ``max_new`` caps the number of realizations started in this call, which
    allows chunked runs (and simulating an interrupted campaign).
    """
    t0 = time.perf_counter()
    plan = plan_campaign(cfg)
    store = RealizationStore(cfg.output_dir)
    store.load()
    store.reconcile()
    workers = cfg.workers if workers is None else workers
    todo = [(i, th) for i, th in plan if store.status(i) != DONE]
    report = RunReport(skipped=[i for i, _ in plan if store.status(i) == DONE])
    if max_new is not None:
        todo = todo[:max_new]
    if workers <= 1 or len(todo) <= 1:
        results = (_worker(cfg, i, th, store.node_path(i)) for i, th in todo)
        for res in results:
            _record(store, report, res)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_worker, cfg, i, th, store.node_path(i)) for i, th in todo]
            for fut in as_completed(futs):
                _record(store, report, fut.result())
    report.seconds = time.perf_counter() - t0
    return report


def _record(store, report, res):
    index, status, diag, secs = res
    store.mark(index, status, diag)
    if status == DONE:
        report.solved.append(index)
        log.info("node %d done in %.1f s", index, secs)
    else:
        report.failed.append(index)
        log.warning("node %d failed: %s", index, diag)


@dataclass
class PostResult:
    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    model: object = None
    difference: np.ndarray = None
    statistics: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    files: list = field(default_factory=list)


def _origin_index(rule):
    hits = np.flatnonzero(np.all(rule.nodes == 0.0, axis=1))
    return int(hits[0]) if hits.size else None


def _sub_rule_indices(fine, coarse):
    """Positions of the coarse nodes among the fine nodes (nested rules)."""
    idx = []
    for node in coarse.nodes:
        hit = np.flatnonzero(np.all(np.abs(fine.nodes - node) <= 1e-12, axis=1))
        if not hit.size:
            raise CampaignError("coarse rule is not nested in the campaign rule")
        idx.append(int(hit[0]))
    return np.array(idx)


def load_store(cfg):
    store = RealizationStore(cfg.output_dir)
    if not store.exists():
        raise CampaignError(f"no campaign manifest in {cfg.output_dir}")
    store.load()
    store.reconcile()
    if store.manifest["config_hash"] != cfg.numerics_hash():
        raise CampaignError("store was produced by a different configuration")
    if not store.complete():
        failed = store.failed()
        pending = [i for i in store.pending() if i not in failed]
        raise CampaignError(f"incomplete store: failed nodes {failed}, pending nodes {pending}")
    return store


def error_models(cfg, values, rule, times, index_set):
    """gPC models from nested coarser Smolyak levels, reusing stored realizations."""
    from ..quadrature import smolyak_sparse
    out = {}
    for lvl in cfg.statistics.error_levels:
        if cfg.stochastic.rule != "smolyak" or lvl > cfg.stochastic.level:
            raise CampaignError("error_levels need a Smolyak campaign of at least that level")
        sub = smolyak_sparse(cfg.stochastic.dim, lvl)
        idx = _sub_rule_indices(rule, sub)
        out[lvl] = gpc.project_coefficients(values[idx], sub, index_set, times)
    return out


def postprocess(cfg, write=True):
    """Quadrature phase: moments, point statistics and diagnostics from the store."""
    store = load_store(cfg)
    values, times = store.load_concentrations()
    rule = stochastic_rule(cfg)
    grid, _ = make_grid(cfg)
    st = cfg.stochastic
    res = None
    if st.method == "gpc":
        iset = gpc.build_multi_index_set(st.dim, st.poly_order, st.strategy)
        model = gpc.project_coefficients(values, rule, iset, times,
                                         provenance={"config_hash": cfg.numerics_hash()})
        res = PostResult(times, model.mean(), model.variance(), model)
        sc = cfg.statistics
        stat_times = sc.times_years or tuple(t / SECONDS_PER_YEAR for t in times)
        for t in stat_times:
            for k, pt in enumerate(sc.points):
                res.statistics.append(gpc.point_statistics(
                    model, t * SECONDS_PER_YEAR, pt, grid, sc.n_samples, sc.quantiles,
                    sc.thresholds, seed=st.seed + k, pdf=sc.pdf))
        if sc.error_levels:
            models = error_models(cfg, values, rule, times, iset)
            for lvl, coarse in sorted(models.items()):
                err, trunc = gpc.approximation_error_estimate(model, coarse, grid.volumes)
                for ti, t in enumerate(times):
                    res.errors.append((float(t / SECONDS_PER_YEAR), lvl, st.level, float(err[ti]), float(trunc[ti])))
    else:
        mean, var = gpc.qmc_moments(values, rule)
        res = PostResult(times, mean, var)
    origin = _origin_index(rule)
    if origin is not None:
        res.difference = values[origin] - res.mean
    if write:
        _write_outputs(cfg, grid, res)
    return res


def _write_outputs(cfg, grid, res):
    out = os.path.join(cfg.output_dir, "results")
    os.makedirs(out, exist_ok=True)
    method = cfg.stochastic.method
    for k, t in enumerate(res.times):
        tag = f"{method}_t{t / SECONDS_PER_YEAR:08.4f}y"
        fields = {"mean": res.mean[k], "variance": res.variance[k]}
        if res.difference is not None:
            fields["deterministic_minus_mean"] = res.difference[k]
        vtk = os.path.join(out, tag + ".vtk")
        csvp = os.path.join(out, tag + ".csv")
        io.write_vtk(vtk, grid, fields, title=f"{method} statistics at t={t / SECONDS_PER_YEAR:g} years")
        io.write_field_csv(csvp, grid, fields)
        res.files += [vtk, csvp]
    if res.statistics:
        p = os.path.join(out, "point_statistics.csv")
        io.write_statistics_csv(p, res.statistics)
        q = os.path.join(out, "exceedance.csv")
        io.write_exceedance_csv(q, res.statistics)
        res.files += [p, q]
        for s in res.statistics:
            name = f"pdf_t{s.time / SECONDS_PER_YEAR:08.4f}y_x{s.x:g}_y{s.y:g}.csv"
            path = os.path.join(out, name)
            io.write_pdf_csv(path, s.pdf_centers, s.pdf_density)
            res.files.append(path)
    if res.errors:
        p = os.path.join(out, "approximation_error.csv")
        with open(p, "w") as fh:
            fh.write("time_years,coarse_level,fine_level,approximation_error,truncation_indicator\n")
            for row in res.errors:
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
        res.files.append(p)
