"""Run configuration: defaults, environment / .env, JSON config file, flags.

Later sources win: defaults < environment (and .env) < ``--config`` file <
command-line flags.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from dotenv import load_dotenv

from construct import MAX_LEVEL, Horizon, Policy, check_example
from errors import ConfigError, HypothesisViolation
from hypernum import Hypernum
from targets import GaugeFamily, GrowthFunction, TargetDistribution, TargetFamily

log = logging.getLogger(__name__)

load_dotenv()

DEFAULT_SEED = 20240601

# setting -> (environment variable, parser); read by build_config, never at import
ENVIRONMENT = {
    'seed': ('HEAVYMIN_SEED', int),
    'workers': ('HEAVYMIN_WORKERS', int),
    'grid_points': ('HEAVYMIN_GRID_POINTS', int),
    'significance': ('HEAVYMIN_SIGNIFICANCE', float),
    'log_level': ('HEAVYMIN_LOG_LEVEL', str),
    'max_level': ('HEAVYMIN_MAX_LEVEL', int),
}

MODES = ('pair', 'family', 'sqrt-split')


def env_settings() -> dict:
    """Settings found in the environment (or .env); unset and empty variables are skipped."""
    settings = {}
    for key, (name, cast) in ENVIRONMENT.items():
        raw = os.getenv(name)
        if raw is None or raw == '':
            continue
        try:
            settings[key] = cast(raw)
        except ValueError as e:
            raise ConfigError(f'environment variable {name}={raw!r} is invalid: {e}') from e
    return settings


# ---- family specs ---------------------------------------------------------

def read_table(path, value_column: str) -> tuple[list[float], list[float]]:
    """Two-column CSV with header ``x,<value_column>``."""
    try:
        with open(path, newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        return [float(r['x']) for r in rows], [float(r[value_column]) for r in rows]
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError(f'cannot read table {path} (columns x,{value_column}): {e}') from e


def _split(spec: str):
    name, _, param = spec.partition(':')
    return name.strip(), param.strip()


def parse_target(spec: str) -> TargetDistribution:
    """``exponential:1``, ``polynomial:3``, ``weibull:0.5`` or ``tabulated:<csv>``."""
    name, param = _split(spec)
    try:
        family = TargetFamily(name)
    except ValueError:
        raise ConfigError(f'unknown target family {name!r} '
                          f'(expected one of {", ".join(f.value for f in TargetFamily)})') from None
    if not param:
        raise ConfigError(f'target {name!r} needs a parameter, e.g. {name}:1')
    if family is TargetFamily.TABULATED:
        xs, rs = read_table(param, 'risk')
        try:
            return TargetDistribution.tabulated(xs, rs)
        except ValueError as e:
            raise ConfigError(f'tabulated target {param}: {e}') from e
    try:
        return TargetDistribution(family, float(param))
    except ValueError as e:
        raise ConfigError(f'target {spec!r}: {e}') from e


def parse_gauge(spec: str) -> GrowthFunction:
    """``power:1``, ``exp:0.5``, ``exp_power:0.25``, ``identity_plus`` or ``tabulated:<csv>``."""
    name, param = _split(spec)
    try:
        family = GaugeFamily(name)
    except ValueError:
        raise ConfigError(f'unknown gauge family {name!r} '
                          f'(expected one of {", ".join(f.value for f in GaugeFamily)})') from None
    if family is GaugeFamily.IDENTITY_PLUS:
        if param:
            raise ConfigError('identity_plus takes no parameter')
        return GrowthFunction.identity_plus()
    if not param:
        raise ConfigError(f'gauge {name!r} needs a parameter, e.g. {name}:1')
    if family is GaugeFamily.TABULATED:
        xs, gs = read_table(param, 'g')
        try:
            return GrowthFunction.tabulated(xs, gs)
        except ValueError as e:
            raise ConfigError(f'tabulated gauge {param}: {e}') from e
    try:
        return GrowthFunction(family, float(param))
    except ValueError as e:
        raise ConfigError(f'gauge {spec!r}: {e}') from e


def read_sequence(path) -> list[Hypernum]:
    """One breakpoint token per line; blank lines and ``#`` comments are skipped."""
    try:
        lines = Path(path).read_text(encoding='utf-8').splitlines()
        return [Hypernum.from_token(s) for s in (ln.strip() for ln in lines) if s and not s.startswith('#')]
    except (OSError, ValueError) as e:
        raise ConfigError(f'cannot read sequence {path}: {e}') from e


def parse_policy(spec: str) -> tuple[Policy, list[Hypernum] | None]:
    """``paper-minimal``, ``exact-minimal``, ``hazard`` or ``explicit:<file>``."""
    name, param = _split(spec)
    try:
        policy = Policy(name)
    except ValueError:
        raise ConfigError(f'unknown policy {spec!r} '
                          f'(expected paper-minimal, exact-minimal, hazard or explicit:<file>)') from None
    if policy is Policy.EXPLICIT:
        if not param:
            raise ConfigError('explicit policy needs a sequence file: explicit:<file>')
        return policy, read_sequence(param)
    return policy, None


# ---- run configuration ----------------------------------------------------

@dataclass
class RunConfig:
    target: str = 'exponential:1'
    gauge: str = 'identity_plus'
    mode: str = 'pair'
    n: int = 2
    k: int = 2
    policy: str = Policy.EXACT_MINIMAL.value
    horizon: int | None = 32
    x_bound: float | None = None
    seed: int = DEFAULT_SEED
    seed_defaulted: bool = True
    samples: int = 0
    grid_points: int = 10_000
    significance: float = 0.01
    workers: int = 1
    max_level: int = MAX_LEVEL
    log_level: str = 'INFO'
    output: str | None = None
    plan: str | None = None
    example: str | None = None
    alpha: float | None = None
    beta: float | None = None
    count: int = 32
    sequence: str | None = None

    _target: TargetDistribution | None = field(default=None, init=False, repr=False)
    _gauge: GrowthFunction | None = field(default=None, init=False, repr=False)

    def apply(self, values: dict, source: str):
        known = {f.name for f in fields(self) if not f.name.startswith('_')}
        for key, value in values.items():
            key = key.replace('-', '_')
            if key not in known:
                raise ConfigError(f'{source}: unknown setting {key!r}')
            if value is not None:
                setattr(self, key, value)
                if key == 'seed':
                    self.seed_defaulted = False
        return self

    @property
    def target_distribution(self) -> TargetDistribution:
        if self._target is None:
            self._target = parse_target(self.target)
        return self._target

    @property
    def growth(self) -> GrowthFunction:
        if self._gauge is None:
            self._gauge = parse_gauge(self.gauge)
        return self._gauge

    @property
    def horizon_spec(self) -> Horizon:
        if self.x_bound is not None:
            return Horizon(x_bound=self.x_bound)
        return Horizon(intervals=int(self.horizon))

    def validate(self, command: str) -> RunConfig:
        """Check every hypothesis the command relies on before any computation."""
        if command in ('construct', 'validate-seq'):
            self._target, self._gauge = parse_target(self.target), parse_gauge(self.gauge)
            if self.mode not in MODES:
                raise ConfigError(f'unknown mode {self.mode!r} (expected {", ".join(MODES)})')
            if self.mode == 'family' or command == 'validate-seq':
                if not 1 < self.k <= self.n:
                    raise HypothesisViolation('1 < k <= n', f'n={self.n}, k={self.k}')
            parse_policy(self.policy)
            if self.x_bound is None and (self.horizon is None or int(self.horizon) < 1):
                raise ConfigError(f'horizon must be at least 1 interval, got {self.horizon}')
        if command == 'figures':
            if self.example is None or self.alpha is None or self.beta is None:
                raise ConfigError('figures needs --example, --alpha and --beta')
            try:
                check_example(self.example, float(self.alpha), float(self.beta))
            except HypothesisViolation:
                raise
            except ValueError:
                raise ConfigError(f'unknown example {self.example!r} '
                                  f'(expected exponential, polynomial or weibull)') from None
            if self.count < 1:
                raise ConfigError(f'count must be at least 1, got {self.count}')
        if command in ('verify', 'sample') and not self.plan:
            raise ConfigError(f'{command} needs a plan file')
        if command == 'validate-seq' and not self.sequence:
            raise ConfigError('validate-seq needs --sequence <file>')
        if self.samples < 0 or (command == 'sample' and self.samples < 1):
            raise ConfigError(f'sample count must be positive, got {self.samples}')
        if not 0.0 < self.significance < 1.0:
            raise ConfigError(f'significance must lie in (0, 1), got {self.significance}')
        if self.workers < 1:
            raise ConfigError(f'workers must be at least 1, got {self.workers}')
        if self.grid_points < 2:
            raise ConfigError(f'grid needs at least 2 points, got {self.grid_points}')
        return self


def load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f'cannot read config file {path}: {e}') from e
    if not isinstance(doc, dict):
        raise ConfigError(f'config file {path} must hold a JSON object')
    return doc


def build_config(flags: dict, config_path=None) -> RunConfig:
    cfg = RunConfig()
    # an environment seed is still announced like the built-in default
    for key, value in env_settings().items():
        setattr(cfg, key, value)
    if config_path:
        cfg.apply(load_config_file(config_path), str(config_path))
    return cfg.apply(flags, 'command line')
