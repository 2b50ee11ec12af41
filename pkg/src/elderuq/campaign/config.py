"""Campaign configuration: a nested YAML document mapped onto dataclasses.

Unknown keys are rejected with their full path so typos in experiment files
fail loudly.
"""

import copy
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml

from ..flow.solver import SolverControls
from ..physics import PhysicalParams
from ..porosity import Mode, PorosityFieldSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    nx: int = 128
    ny: int = 32
    Lx: float = 600.0
    Ly: float = 150.0
    inflow_x_range: tuple = (150.0, 450.0)
    inflow_concentration: float = 1.0


@dataclass(frozen=True)
class StochasticConfig:
    method: str = "gpc"  # gpc | qmc
    dim: int = 3
    poly_order: int = 3
    strategy: str = "total"
    rule: str = "smolyak"  # smolyak | tensor-cc | tensor-gl | halton
    level: int = 2
    n: int = 128
    seed: int = 0


@dataclass(frozen=True)
class StatisticsConfig:
    points: tuple = ((150.0, 50.0), (300.0, 75.0), (500.0, 100.0))
    times_years: tuple = ()
    thresholds: tuple = (0.1, 0.5)
    quantiles: tuple = (0.025, 0.25, 0.5, 0.75, 0.975)
    n_samples: int = 10**6
    pdf: str = "fd"
    error_levels: tuple = ()


@dataclass(frozen=True)
class CampaignConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    porosity: PorosityFieldSpec = field(default_factory=PorosityFieldSpec)
    solver: SolverControls = field(default_factory=SolverControls)
    stochastic: StochasticConfig = field(default_factory=StochasticConfig)
    snapshots_years: tuple = (7.0,)
    statistics: StatisticsConfig = field(default_factory=StatisticsConfig)
    output_dir: str = "campaign_out"
    workers: int = 1

    def to_dict(self):
        return _to_plain(dataclasses.asdict(self))

    def numerics_hash(self):
        """Hash of everything that influences numerical results.

        Output directory and worker count are excluded: they must not change
        any number in the store.
        """
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        d.pop("statistics")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **sections):
        return dataclasses.replace(self, **sections)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _tuplify(value)
    if cls is PorosityFieldSpec and "modes" in kwargs:
        modes = []
        for i, m in enumerate(kwargs["modes"]):
            if isinstance(m, tuple):
                raise ConfigError(f"{path}.modes[{i}]: expected a mapping")
            modes.append(_build(Mode, m, f"{path}.modes[{i}]"))
        kwargs["modes"] = tuple(modes)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


SECTIONS = {
    "grid": GridConfig,
    "physics": PhysicalParams,
    "porosity": PorosityFieldSpec,
    "solver": SolverControls,
    "stochastic": StochasticConfig,
    "statistics": StatisticsConfig,
}


def config_from_dict(data):
    data = copy.deepcopy(data or {})
    if not isinstance(data, dict):
        raise ConfigError("config: expected a mapping at top level")
    top = {f.name for f in dataclasses.fields(CampaignConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"config: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, cls in SECTIONS.items():
        if name in data:
            kwargs[name] = _build(cls, data.pop(name), name)
    for key, value in data.items():
        kwargs[key] = _tuplify(value)
    cfg = CampaignConfig(**kwargs)
    validate(cfg)
    return cfg


def load_config(path, env=None):
    env = os.environ if env is None else env
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    cfg = config_from_dict(data)
    overrides = {}
    if env.get("ELDERUQ_WORKERS"):
        overrides["workers"] = int(env["ELDERUQ_WORKERS"])
    if env.get("ELDERUQ_OUTPUT_DIR"):
        overrides["output_dir"] = env["ELDERUQ_OUTPUT_DIR"]
    return cfg.replace(**overrides) if overrides else cfg


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def validate(cfg):
    st = cfg.stochastic
    if st.method not in ("gpc", "qmc"):
        raise ConfigError(f"stochastic.method: expected gpc or qmc, got {st.method!r}")
    if st.dim != cfg.porosity.dim:
        raise ConfigError(f"stochastic.dim: {st.dim} does not match the {cfg.porosity.variant} "
                          f"porosity field with {cfg.porosity.dim} parameters")
    if st.method == "qmc" and st.rule != "halton":
        raise ConfigError("stochastic.rule: qmc campaigns use the halton rule")
    if st.method == "gpc" and st.rule == "halton":
        raise ConfigError("stochastic.rule: gpc projection needs a deterministic rule")
    if st.rule not in ("smolyak", "tensor-cc", "tensor-gl", "halton"):
        raise ConfigError(f"stochastic.rule: unknown rule {st.rule!r}")
    if st.rule == "halton" and st.n < 1:
        raise ConfigError("stochastic.n: need at least one qMC point")
    if st.poly_order < 0:
        raise ConfigError("stochastic.poly_order: must be non-negative")
    if st.strategy not in ("total", "max", "product"):
        raise ConfigError(f"stochastic.strategy: unknown strategy {st.strategy!r}")
    for i, t in enumerate(cfg.snapshots_years):
        if t < 0 or t > cfg.solver.t_end_years * (1 + 1e-12):
            raise ConfigError(f"snapshots_years[{i}]: {t} outside [0, t_end_years]")
    for i, t in enumerate(cfg.statistics.times_years):
        if not any(abs(t - s) <= 1e-9 for s in cfg.snapshots_years):
            raise ConfigError(f"statistics.times_years[{i}]: {t} is not a snapshot time")
    if cfg.workers < 1:
        raise ConfigError("workers: must be at least 1")
    g = cfg.grid
    if g.nx < 1 or g.ny < 1:
        raise ConfigError("grid: cell counts must be positive")
    if abs(g.Lx - cfg.porosity.Lx) > 1e-9 or abs(g.Ly - cfg.porosity.Ly) > 1e-9:
        raise ConfigError("grid: extents differ from the porosity field's domain")
