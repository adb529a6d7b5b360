"""
Experiment configuration files and environment defaults.

A config is a JSON document:

    {
      "schema": "incidental-experiment/1",
      "name": "table2_setting4",
      "suite": "rmse",
      "experiment": {"n": 200, "mu": {"p0": 0.8, "p1": 0.1, "p2": 0.1, "c": 5}, ...},
      "options": {"alpha": 0.05}
    }

`experiment` maps onto ExperimentConfig. `x_cov` may be a scalar variance
(times the identity) or a d x d matrix; a lambda grid entry may be a list or
{"start", "stop", "num"} for a linear grid. `mu_fixed_seed` freezes one
mechanism draw as mu_fixed; `mu_fixed_match` ({"mean_square", "nonzero",
"seeds"}) freezes the draw whose scale best matches those targets.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from .data_models import (
    ExperimentConfig, LambdaProcedureConfig, Method, MuMechanism, PenaltyKind, default_lambda_grid,
)
from .exceptions import ConfigError
from .simulation import MATCH_SEEDS, frozen_incidental, matched_incidental

logger = logging.getLogger(__name__)

SCHEMA = 'incidental-experiment/1'
SUITES = ('rmse', 'coverage', 'qq', 'selection')
THREADS_ENV = 'INCIDENTAL_THREADS'

_TOP_KEYS = {'schema', 'name', 'suite', 'experiment', 'options'}
_EXPERIMENT_KEYS = {
    'n', 'd', 'beta_star', 'sigma', 'x_cov', 'mu', 'mu_fixed', 'mu_fixed_seed', 'mu_fixed_match',
    'reps', 'seed', 'lambda_grid', 'methods', 'lambda_procedure',
}
_OPTION_KEYS = {
    'rmse': set(),
    'coverage': {'alpha', 'p1_grid', 'p2_grid', 'component'},
    'qq': {'lambda', 'component', 'penalty'},
    'selection': {'lambda', 'threshold', 'penalty'},
}


@dataclass
class ExperimentSuite:
    """A validated config file: which suite to run, on which setting."""
    name: str
    suite: str
    config: ExperimentConfig
    options: Dict[str, Any] = field(default_factory=dict)
    source: str = ''


def _reject_unknown(section: str, given: Dict[str, Any], allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _lambda_grid(raw: Dict[str, Any]) -> Dict[PenaltyKind, np.ndarray]:
    grids = {}
    for kind, spec in raw.items():
        try:
            kind = PenaltyKind(kind)
        except ValueError:
            raise ConfigError(f"lambda_grid key must be 'soft' or 'hard', got {kind!r}")
        if isinstance(spec, dict):
            _reject_unknown(f"lambda_grid.{kind.value}", spec, {'start', 'stop', 'num'})
            grids[kind] = np.linspace(float(spec['start']), float(spec['stop']), int(spec['num']))
        else:
            grids[kind] = np.asarray(spec, dtype=float)
    return grids


def build_experiment_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Turn the `experiment` section into an ExperimentConfig."""
    _reject_unknown('experiment', raw, _EXPERIMENT_KEYS)
    if sum(key in raw for key in ('mu_fixed', 'mu_fixed_seed', 'mu_fixed_match')) > 1:
        raise ConfigError("give at most one of mu_fixed, mu_fixed_seed and mu_fixed_match")

    kwargs: Dict[str, Any] = {}
    for key in ('n', 'd', 'reps', 'seed'):
        if key in raw:
            kwargs[key] = int(raw[key])
    if 'sigma' in raw:
        kwargs['sigma'] = float(raw['sigma'])
    d = kwargs.get('d', 2)
    if 'beta_star' in raw:
        kwargs['beta_star'] = np.asarray(raw['beta_star'], dtype=float)
    elif d != 2:
        kwargs['beta_star'] = np.ones(d)
    if 'x_cov' in raw:
        x_cov = np.asarray(raw['x_cov'], dtype=float)
        kwargs['x_cov'] = x_cov * np.eye(d) if x_cov.ndim == 0 else x_cov
    elif d != 2:
        kwargs['x_cov'] = np.eye(d)
    if 'mu' in raw:
        kwargs['mu'] = MuMechanism(**raw['mu'])
    if 'lambda_grid' in raw:
        grids = _lambda_grid(raw['lambda_grid'])
        defaults = default_lambda_grid()
        defaults.update(grids)
        kwargs['lambda_grid'] = defaults
    if 'methods' in raw:
        kwargs['methods'] = tuple(Method(m) for m in raw['methods'])
    if 'lambda_procedure' in raw:
        kwargs['lambda_procedure'] = LambdaProcedureConfig(**raw['lambda_procedure'])
    if 'mu_fixed' in raw:
        kwargs['mu_fixed'] = np.asarray(raw['mu_fixed'], dtype=float)
    elif 'mu_fixed_seed' in raw:
        mechanism = kwargs.get('mu', MuMechanism())
        kwargs['mu_fixed'] = frozen_incidental(mechanism, kwargs.get('n', 200), int(raw['mu_fixed_seed']))
    elif 'mu_fixed_match' in raw:
        match = raw['mu_fixed_match']
        _reject_unknown('mu_fixed_match', match, {'mean_square', 'nonzero', 'seeds'})
        _, kwargs['mu_fixed'] = matched_incidental(
            kwargs.get('mu', MuMechanism()), kwargs.get('n', 200),
            float(match['mean_square']), int(match['nonzero']), int(match.get('seeds', MATCH_SEEDS)),
        )

    return ExperimentConfig(**kwargs)


def parse_experiment_config(document: Dict[str, Any], source: str = '<memory>') -> ExperimentSuite:
    """
    Validate a decoded config document.

    Raises:
        ConfigError: on a wrong schema tag, unknown keys or invalid values
    """
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: top level must be an object")
    _reject_unknown('config', document, _TOP_KEYS)
    if document.get('schema') != SCHEMA:
        raise ConfigError(f"{source}: expected schema {SCHEMA!r}, got {document.get('schema')!r}")
    suite = document.get('suite')
    if suite not in SUITES:
        raise ConfigError(f"{source}: suite must be one of {', '.join(SUITES)}, got {suite!r}")
    options = dict(document.get('options', {}))
    _reject_unknown(f'options for {suite}', options, _OPTION_KEYS[suite])
    if suite in ('qq', 'selection') and 'lambda' not in options:
        raise ConfigError(f"{source}: the {suite} suite needs options.lambda")

    try:
        config = build_experiment_config(document.get('experiment', {}))
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{source}: invalid experiment section: {exc}") from exc

    component = options.get('component', 0)
    if not isinstance(component, int) or isinstance(component, bool) or not 0 <= component < config.d:
        raise ConfigError(f"{source}: options.component must be an index in [0, {config.d}), "
                          f"got {component!r}")

    return ExperimentSuite(
        name=str(document.get('name', Path(source).stem)),
        suite=suite,
        config=config,
        options=options,
        source=source,
    )


def load_experiment_config(path: Union[str, Path]) -> ExperimentSuite:
    """
    Read and validate a JSON experiment config.

    Args:
        path: Config file path

    Returns:
        ExperimentSuite

    Raises:
        ConfigError: if the file is missing or unreadable, not JSON, or fails validation
    """
    path = Path(path)
    try:
        with open(path, encoding='utf-8') as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    suite = parse_experiment_config(document, source=str(path))
    logger.info("loaded %s suite %r from %s", suite.suite, suite.name, path)
    return suite


def default_threads() -> int:
    """Worker count from INCIDENTAL_THREADS, else the available CPUs."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == '':
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}")
    return threads
