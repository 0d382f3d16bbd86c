"""Run configuration: flat key = value text files with includable presets.

A config file holds one ``key = value`` pair per line (``#`` comments);
values are parsed as JSON where possible and kept as strings otherwise.  An
``include`` line merges a shipped preset id or another file first, so every
experiment is reproducible from a single small file of overrides.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .grids import make_uniform_grid
from .mechanisms import make_mechanism
from .priors import (CommonValuePrior, AffiliatedValuesPrior, BernoulliWeightsLLGPrior,
                     CustomDensityMarginal, IndependentPrivatePrior,
                     TruncatedGaussianMarginal, UniformMarginal)


@dataclass
class RunConfig:
    mechanism: str = "fpsb"
    agents: int = 2
    payment_rule: str = "NZ"
    tullock_r: float = 1.0
    risk_rho: float = 1.0
    split_cost_factor: float = 0.3
    split_cost_model: str = "scaled"

    prior: str = "uniform"
    obs_lower: object = 0.0           # scalar or per-agent list
    obs_upper: object = 1.0
    value_lower: float = 0.0
    value_upper: float = 1.0
    gamma: float = 0.5
    mu: float = 1.2
    sigma: float = 0.1
    density: str = ""
    prior_samples: int = 1_000_000
    prior_seed: int = 987654321

    obs_points: int = 64
    action_points: int = 64
    value_points: int = 64
    action_lower: object = 0.0        # scalar or per-axis list
    action_upper: object = 1.0

    learner: str = "soda1"
    eta0: float = 1.0
    step_beta: float = 0.5
    iterations: int = 1000
    tolerance: float = 1e-4
    check_interval: int = 10
    init: str = "random"
    symmetric: bool = True

    runs: int = 10
    seed: int = 1

    eval_samples: int = 1 << 18
    analytic: str = "auto"
    plot_points: int = 150
    memory_budget_gib: float = 2.0

    name: str = ""
    notes: str = ""

    def validate(self):
        if self.agents < 2:
            raise ValueError("need at least 2 agents")
        if min(self.obs_points, self.action_points, self.value_points) < 2:
            raise ValueError("grids need at least 2 points per axis")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.analytic not in ("auto", "none"):
            raise ValueError("analytic must be 'auto' or 'none'")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {json.dumps(v)}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    t = _FIELD_TYPES[key]
    if t == "int":
        return int(value)
    if t == "float":
        return float(value)
    if t == "bool":
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        return bool(value)
    if t == "str":
        return str(value)
    return value


def parse_config_text(text: str, *, base_dir: Path | None = None) -> dict:
    """Flat key/value parsing with recursive ``include`` merging."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass  # bare strings stay strings
        if key == "include":
            out.update(_resolve_include(str(value), base_dir))
        else:
            out[key] = value
    return out


def _resolve_include(ref: str, base_dir: Path | None) -> dict:
    from .presets import get_preset, has_preset

    if has_preset(ref):
        return dict(get_preset(ref))
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise FileNotFoundError(f"include '{ref}' is neither a preset nor a readable file")
    return parse_config_text(path.read_text(), base_dir=path.parent)


def config_from_mapping(mapping: dict) -> RunConfig:
    unknown = set(mapping) - set(_FIELD_TYPES)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in mapping.items()})
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    return config_from_mapping(parse_config_text(path.read_text(), base_dir=path.parent))


def _per_agent(value, n: int) -> list[float]:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ValueError(f"expected {n} per-agent entries, got {len(value)}")
        return [float(v) for v in value]
    return [float(value)] * n


def _per_axis(value, d: int) -> list[float]:
    if isinstance(value, (list, tuple)):
        if len(value) != d:
            raise ValueError(f"expected {d} per-axis entries, got {len(value)}")
        return [float(v) for v in value]
    return [float(value)] * d


def _compile_density(expr: str):
    if not expr:
        raise ValueError("prior 'custom_density' needs a density expression in o")
    code = compile(expr, "<density>", "eval")

    def fn(o):
        return np.asarray(eval(code, {"__builtins__": {}}, {"np": np, "o": o}),
                          dtype=np.float64) * np.ones_like(o)

    return fn


def build_prior_model(cfg: RunConfig):
    n = cfg.agents
    if cfg.prior in ("uniform", "gaussian_trunc", "custom_density"):
        lows = _per_agent(cfg.obs_lower, n)
        highs = _per_agent(cfg.obs_upper, n)
        specs = []
        for lo, hi in zip(lows, highs):
            if cfg.prior == "uniform":
                specs.append(UniformMarginal(lo, hi))
            elif cfg.prior == "gaussian_trunc":
                specs.append(TruncatedGaussianMarginal(cfg.mu, cfg.sigma, lo, hi))
            else:
                specs.append(CustomDensityMarginal(_compile_density(cfg.density), lo, hi))
        return IndependentPrivatePrior(specs)
    if cfg.prior == "common_value":
        return CommonValuePrior(n)
    if cfg.prior == "affiliated":
        if n != 2:
            raise ValueError("the affiliated-values model is defined for 2 agents")
        return AffiliatedValuesPrior()
    if cfg.prior == "bernoulli_llg":
        if n != 3:
            raise ValueError("the correlated-locals model is defined for 3 agents")
        return BernoulliWeightsLLGPrior(cfg.gamma)
    raise ValueError(f"unknown prior kind '{cfg.prior}'")


def _refine_groups(a: list[list[int]], b: list[list[int]], n: int) -> list[list[int]]:
    """Common refinement: agents grouped only if grouped in both partitions."""
    label_a = {i: gi for gi, g in enumerate(a) for i in g}
    label_b = {i: gi for gi, g in enumerate(b) for i in g}
    buckets: dict = {}
    for i in range(n):
        buckets.setdefault((label_a[i], label_b[i]), []).append(i)
    return sorted(buckets.values())


@dataclass
class Problem:
    """A fully materialized game: mechanism, grids, and discretized prior."""

    config: RunConfig
    mech: object
    prior_model: object
    obs_grids: list
    val_grids: list
    action_grids: list       # per agent, tuple of per-axis grids
    groups: list
    prior: object = field(default=None, repr=False)

    @property
    def memory_budget(self) -> int:
        return int(self.config.memory_budget_gib * (1 << 30))

    def discretize(self):
        if self.prior is None:
            self.prior = self.prior_model.discretize(
                self.obs_grids, self.val_grids, sample_count=self.config.prior_samples,
                seed=self.config.prior_seed)
        return self.prior


def _action_bounds(cfg: RunConfig):
    """Per-agent lists of per-axis (lower, upper) action bounds.

    The split-award rectangle is per-axis (both suppliers share it); for the
    one-dimensional mechanisms a list value is read as per-agent bounds.
    """
    n = cfg.agents
    if cfg.mechanism == "split_award":
        lo = _per_axis(cfg.action_lower, 2)
        hi = _per_axis(cfg.action_upper, 2)
        rect = tuple((lo[d], hi[d]) for d in range(2))
        return [rect] * n
    lows = _per_agent(cfg.action_lower, n)
    highs = _per_agent(cfg.action_upper, n)
    return [((lo, hi),) for lo, hi in zip(lows, highs)]


def build_problem(cfg: RunConfig) -> Problem:
    cfg.validate()
    n = cfg.agents
    bounds = _action_bounds(cfg)
    mech = make_mechanism(cfg.mechanism, n, risk_rho=cfg.risk_rho,
                          payment_rule=cfg.payment_rule, tullock_r=cfg.tullock_r,
                          split_cost_factor=cfg.split_cost_factor,
                          split_cost_model=cfg.split_cost_model,
                          split_action_rect=bounds[0])
    model = build_prior_model(cfg)
    obs_grids = [make_uniform_grid(lo, hi, cfg.obs_points) for lo, hi in model.obs_bounds]
    action_grids = [tuple(make_uniform_grid(lo, hi, cfg.action_points) for lo, hi in rect)
                    for rect in bounds]
    if model.values_equal_observations:
        val_grids = list(obs_grids)
    else:
        val_grids = [make_uniform_grid(cfg.value_lower, cfg.value_upper, cfg.value_points)
                     for _ in range(n)]
    if cfg.symmetric:
        groups = _refine_groups(mech.symmetry_groups(), model.symmetry_groups(), n)
    else:
        groups = [[i] for i in range(n)]
    return Problem(cfg, mech, model, obs_grids, val_grids, action_grids, groups)
