"""Command line interface: ``elderuq <subcommand> [options]``.

Exit status is 0 on success, 1 for usage errors and 2 for runtime failures.
"""

import argparse
import logging
import os
import sys

import numpy as np

from ..flow.solver import RealizationFailure
from ..mesh import build_grid
from ..porosity import FieldDomainError, porosity_on_grid
from ..quadrature import QuadratureError, build_rule
from . import io
from .config import CampaignConfig, ConfigError, load_config
from .runner import CampaignError, plan_campaign, postprocess, run_campaign, solve_realization
from .store import StoreError
from .verify import run_checks

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _theta(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML campaign configuration")
    common.add_argument("--workers", type=int, metavar="N", help="number of worker processes")
    common.add_argument("--output", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="elderuq", description="Uncertainty quantification for density-driven flow.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    sub.add_parser("plan", parents=[common], help="write the manifest and list the planned nodes")
    run = sub.add_parser("run", parents=[common], help="solve all pending realizations")
    run.add_argument("--max-new", type=int, metavar="K", help="stop after K new realizations")
    sub.add_parser("post", parents=[common], help="statistics from a complete store")

    rd = sub.add_parser("rule-dump", parents=[common], help="print a quadrature rule as CSV")
    rd.add_argument("--dim", type=int, help="stochastic dimension (default: from config)")
    rd.add_argument("--rule", help="smolyak, tensor-cc, tensor-gl or halton")
    rd.add_argument("--level", type=int)
    rd.add_argument("-n", type=int, help="points per direction (tensor-gl) or qMC size")

    fd = sub.add_parser("field-dump", parents=[common], help="write phi(x, theta) as VTK and CSV")
    fd.add_argument("--theta", type=_theta, required=True, metavar="v1,v2,...")

    so = sub.add_parser("solve-one", parents=[common], help="run a single deterministic realization")
    so.add_argument("--theta", type=_theta, required=True, metavar="v1,v2,...")

    sub.add_parser("verify", parents=[common], help="run the built-in invariant checks")
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else CampaignConfig()
    over = {}
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        over["workers"] = args.workers
    if args.output is not None:
        over["output_dir"] = args.output
    return cfg.replace(**over) if over else cfg


def _check_theta(cfg, theta):
    if theta.size != cfg.stochastic.dim:
        raise UsageError(f"--theta has {theta.size} values, configuration expects {cfg.stochastic.dim}")
    if np.any(np.abs(theta) > 1.0):
        raise UsageError("--theta values must lie in [-1, 1]")


def _cmd_plan(cfg, args):
    plan = plan_campaign(cfg)
    print(f"{len(plan)} realizations planned in {cfg.output_dir}")
    for i, th in plan:
        print(i, " ".join(f"{v:.12g}" for v in th))


def _cmd_run(cfg, args):
    rep = run_campaign(cfg, max_new=args.max_new)
    print(f"solved {len(rep.solved)}, skipped {len(rep.skipped)}, failed {len(rep.failed)} "
          f"in {rep.seconds:.1f} s")
    if rep.failed:
        print("failed nodes: " + " ".join(map(str, sorted(rep.failed))), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_post(cfg, args):
    res = postprocess(cfg)
    for f in res.files:
        print(f)


def _cmd_rule_dump(cfg, args):
    st = cfg.stochastic
    rule = build_rule(args.dim or st.dim, args.rule or st.rule,
                      level=st.level if args.level is None else args.level,
                      n=st.n if args.n is None else args.n)
    io.write_rule_csv(sys.stdout, rule)


def _cmd_field_dump(cfg, args):
    _check_theta(cfg, args.theta)
    g = cfg.grid
    grid = build_grid(g.nx, g.ny, g.Lx, g.Ly)
    phi = porosity_on_grid(cfg.porosity, grid, args.theta)
    os.makedirs(cfg.output_dir, exist_ok=True)
    stem = os.path.join(cfg.output_dir, "porosity_" + "_".join(f"{v:g}" for v in args.theta))
    io.write_vtk(stem + ".vtk", grid, {"porosity": phi}, title=f"porosity theta={list(args.theta)}")
    io.write_field_csv(stem + ".csv", grid, {"porosity": phi})
    print(stem + ".vtk")
    print(stem + ".csv")


def _cmd_solve_one(cfg, args):
    _check_theta(cfg, args.theta)
    disc, snaps = solve_realization(cfg, args.theta)
    os.makedirs(cfg.output_dir, exist_ok=True)
    for s in snaps:
        stem = os.path.join(cfg.output_dir, f"solve_t{s.time_years:08.4f}y")
        fields = {"concentration": s.c, "pressure": s.p}
        io.write_vtk(stem + ".vtk", disc.grid, fields, title=f"theta={list(args.theta)} t={s.time_years:g} years")
        io.write_field_csv(stem + ".csv", disc.grid, fields)
        print(stem + ".vtk")


def _cmd_verify(cfg, args):
    return EXIT_RUNTIME if run_checks() else EXIT_OK


COMMANDS = {
    "plan": _cmd_plan,
    "run": _cmd_run,
    "post": _cmd_post,
    "rule-dump": _cmd_rule_dump,
    "field-dump": _cmd_field_dump,
    "solve-one": _cmd_solve_one,
    "verify": _cmd_verify,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        return COMMANDS[args.command](cfg, args) or EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CampaignError, StoreError, RealizationFailure, FieldDomainError, QuadratureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
