"""Shipped experiment presets, one per supported benchmark setting.

Preset values are plain config mappings; they can be run directly
(``preset run <id>``) or pulled into a config file via ``include = <id>``.
Step parameters were calibrated so each preset certifies within its
iteration cap; comments mark where this build's calibration departs from
the usual settings for the family.
"""

from __future__ import annotations

_BASE = {
    "obs_points": 64,
    "action_points": 64,
    "value_points": 64,
    "iterations": 1000,
    "tolerance": 1e-4,
    "check_interval": 10,
    "runs": 10,
    "seed": 1,
    "eval_samples": 1 << 18,
}

PRESETS: dict[str, dict] = {}


def _add(name: str, **overrides):
    cfg = dict(_BASE)
    cfg.update(overrides)
    cfg["name"] = name
    PRESETS[name] = cfg


_add("fpsb_2_uniform",
     mechanism="fpsb", agents=2, prior="uniform",
     obs_lower=0.0, obs_upper=1.0, action_lower=0.0, action_upper=1.0,
     learner="soda1", eta0=100.0, step_beta=0.05)

# same game with the gentler step size used for the discretization sweep
_add("fpsb_sweep",
     mechanism="fpsb", agents=2, prior="uniform",
     obs_lower=0.0, obs_upper=1.0, action_lower=0.0, action_upper=1.0,
     learner="soda1", eta0=10.0, step_beta=0.05)

_add("common_value_spsb",
     mechanism="spsb", agents=3, prior="common_value",
     value_lower=0.0, value_upper=1.0,
     action_lower=0.0, action_upper=1.5,
     learner="soma2", eta0=50.0, step_beta=0.5,
     prior_samples=1 << 22)

# entropic updates with a near-constant step are the only family that
# certifies below 1e-4 here within the iteration cap
_add("affiliated_fpsb",
     mechanism="fpsb", agents=2, prior="affiliated",
     value_lower=0.0, value_upper=2.0,
     action_lower=0.0, action_upper=1.5,
     learner="soda1", eta0=100.0, step_beta=0.05,
     prior_samples=1 << 22)

# projected ascent with a decaying step converges within tens of iterations
# here; the near-constant schedule kept the locals oscillating
_LLG_LEARNERS = {
    "NZ": ("soma2", 20.0, 0.5),
    "NVCG": ("soma2", 20.0, 0.5),
    "NB": ("soma2", 20.0, 0.5),
    "first_price": ("sofw", 1.0, 0.5),
}
for _rule, _tag in [("NZ", "nz"), ("NVCG", "nvcg"), ("NB", "nb"),
                    ("first_price", "first_price")]:
    for _gamma, _gtag in [(0.1, "g01"), (0.5, "g05"), (0.9, "g09")]:
        _learner, _eta0, _beta = _LLG_LEARNERS[_rule]
        _add(f"llg_{_tag}_{_gtag}",
             mechanism="llg", agents=3, payment_rule=_rule,
             prior="bernoulli_llg", gamma=_gamma,
             action_lower=[0.0, 0.0, 0.0], action_upper=[1.0, 1.0, 2.0],
             learner=_learner, eta0=_eta0, step_beta=_beta,
             prior_samples=1 << 22)

for _prior, _ptag, _soma_eta in [("uniform", "uniform", 0.01), ("gaussian_trunc", "gaussian", 0.05)]:
    _add(f"split_award_{_ptag}",
         mechanism="split_award", agents=2, prior=_prior,
         obs_lower=1.0, obs_upper=1.4, mu=1.2, sigma=0.1,
         obs_points=32, action_points=64,
         action_lower=[1.0, 0.3], action_upper=[2.5, 1.2],
         split_cost_factor=0.3, split_cost_model="scaled",
         learner="soda1", eta0=20.0, step_beta=0.05)

for _rho, _rtag in [(0.5, "r05"), (0.7, "r07"), (0.9, "r09"), (1.0, "r10")]:
    _add(f"risk_fpsb_{_rtag}",
         mechanism="fpsb", agents=2, prior="uniform", risk_rho=_rho,
         obs_lower=0.0, obs_upper=1.0, action_lower=0.0, action_upper=0.8,
         learner="soda1", eta0=20.0, step_beta=0.05)
    _add(f"risk_allpay_{_rtag}",
         mechanism="all_pay", agents=2, prior="uniform", risk_rho=_rho,
         obs_lower=0.0, obs_upper=1.0, action_lower=0.0, action_upper=0.8,
         learner="soda1", eta0=25.0, step_beta=0.05)

for _r, _rtag in [(0.5, "r05"), (1.0, "r10"), (1.5, "r15")]:
    _add(f"tullock_{_rtag}",
         mechanism="tullock", agents=2, prior="uniform", tullock_r=_r,
         obs_lower=0.0, obs_upper=1.0, action_lower=0.0, action_upper=0.5,
         learner="soda1", eta0=100.0, step_beta=0.05)
    _add(f"tullock_{_rtag}_asym",
         mechanism="tullock", agents=2, prior="uniform", tullock_r=_r,
         obs_lower=[0.0, 1.0], obs_upper=[1.0, 2.0],
         action_lower=0.0, action_upper=0.5,
         learner="soda1", eta0=100.0, step_beta=0.05)


def has_preset(name: str) -> bool:
    return name in PRESETS


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset '{name}'; see 'preset list'")
    return dict(PRESETS[name])


def preset_names() -> list[str]:
    return sorted(PRESETS)
