"""Python access to the pinnmcts C++ core.

Configs are plain dicts (same schema as the JSON files under configs/).
"""

import json

from . import _pinnmcts as _core
from ._pinnmcts import (
    ACTIONS,
    Forecaster,
    __version__,
    allowed_actions,
    bang_bang,
    continuous_rule,
    cumulative_noise,
    discrete_rule,
    new_forecaster,
    normalize_reward,
    physics_targets,
    reward,
    reward_bounds,
)


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_core.default_config())


def normalize_config(config):
    return json.loads(_core.normalize_config(_dump(config)))


def config_hash(config):
    return _core.config_hash(_dump(config))


def scenario(config=None, days=1, seed=1):
    return _core.scenario(_dump(config), days, seed)


def forecast_eval(config, out_dir=""):
    return _core.forecast_eval(_dump(config), str(out_dir))


def control_eval(config, out_dir=""):
    return _core.control_eval(_dump(config), str(out_dir))


def alphazero_eval(config, out_dir=""):
    return _core.alphazero_eval(_dump(config), str(out_dir))


__all__ = [
    "ACTIONS",
    "Forecaster",
    "__version__",
    "allowed_actions",
    "alphazero_eval",
    "bang_bang",
    "config_hash",
    "continuous_rule",
    "control_eval",
    "cumulative_noise",
    "default_config",
    "discrete_rule",
    "forecast_eval",
    "new_forecaster",
    "normalize_config",
    "normalize_reward",
    "physics_targets",
    "reward",
    "reward_bounds",
    "scenario",
]
