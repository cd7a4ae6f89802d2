"""Experiment configuration: YAML document <-> validated dataclasses."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import yaml

from ..baselines import RuleConfig
from ..domain import DomainConfig
from ..pomcp import PlannerConfig

PLANNER_KINDS = ("pomcp", "bapomcp", "rule", "noop", "random")
WORKERS_ENV = "MTDPLAN_WORKERS"
PLANNER_RATE_BOUNDS = (0.05, 0.95)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def default_pomcp() -> PlannerConfig:
    return PlannerConfig(num_simulations=1024, K=1200, max_depth=30, use_preferred_actions=True)


@dataclass
class ExperimentConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    planner: str = "pomcp"
    planners: List[str] = field(default_factory=lambda: ["pomcp", "rule:1", "rule:2", "noop"])
    pomcp: PlannerConfig = field(default_factory=default_pomcp)
    rule_rb: int = 1
    bapomcp_prior_scale: int = 1000
    true_attack_rate: float = 0.1
    planner_attack_rate: Optional[float] = None
    observation_rates: List[float] = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    noise_pairs: List[Tuple[float, float]] = field(
        default_factory=lambda: [(0.1, 0.1), (0.1, 0.5), (0.1, 0.9), (0.9, 0.9), (0.9, 0.1)])
    episodes: int = 100
    horizon: int = 200
    seed: int = 0
    out_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.episodes < 1:
            raise ConfigError("episodes", f"must be >= 1, got {self.episodes}")
        if self.horizon < 1:
            raise ConfigError("horizon", f"must be >= 1, got {self.horizon}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        if not self.observation_rates:
            raise ConfigError("observation_rates", "grid must be non-empty")
        for r in self.observation_rates:
            if not 0.0 <= r <= 1.0:
                raise ConfigError("observation_rates", f"rate {r} outside [0, 1]")
        if not self.planners:
            raise ConfigError("planners", "list must be non-empty")
        for p in [self.planner, *self.planners]:
            parse_planner(p)
        for name in ("true_attack_rate", "planner_attack_rate"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigError(name, f"must lie in [0, 1], got {v}")
        for pair in self.noise_pairs:
            if len(pair) != 2 or not all(0.0 <= x <= 1.0 for x in pair):
                raise ConfigError("noise_pairs", f"invalid (true_rate, planner_rate) pair {pair!r}")
        if self.rule_rb < 1 or self.rule_rb > self.domain.launched:
            raise ConfigError("rule_rb", f"must be a non-zero attack phase, got {self.rule_rb}")
        if self.bapomcp_prior_scale < 1:
            raise ConfigError("bapomcp_prior_scale", "must be >= 1")

    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(WORKERS_ENV, f"not an integer: {env!r}") from None
            if n < 1:
                raise ConfigError(WORKERS_ENV, "must be >= 1")
            return n
        return self.workers

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise_pairs"] = [list(p) for p in self.noise_pairs]
        return d


def parse_planner(spec: str) -> Tuple[str, Optional[int]]:
    """``"rule:2"`` -> ``("rule", 2)``; other names carry no argument."""
    name, _, arg = str(spec).partition(":")
    if name not in PLANNER_KINDS:
        raise ConfigError("planner", f"unknown planner {spec!r}; choose from {', '.join(PLANNER_KINDS)}")
    if arg:
        if name != "rule":
            raise ConfigError("planner", f"planner {name!r} takes no argument")
        try:
            rb = int(arg)
        except ValueError:
            raise ConfigError("planner", f"rule threshold must be an integer, got {arg!r}") from None
        try:
            RuleConfig(rb)
        except ValueError as exc:
            raise ConfigError("planner", str(exc)) from None
        return name, rb
    return name, None


def _build(cls, data, prefix: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(prefix, f"expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown field")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _coerce(known[key], value, f"{prefix}.{key}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix, str(exc)) from None


def _coerce(f: dataclasses.Field, value, path: str):
    default = f.default if f.default is not dataclasses.MISSING else None
    if default is None and f.default_factory is not dataclasses.MISSING:
        default = f.default_factory()
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
    elif isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        value = float(value)
    return value


def config_from_dict(data: dict) -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config document must be a mapping")
    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown field")
    kwargs = {}
    for key, value in data.items():
        if key == "domain":
            kwargs[key] = _build(DomainConfig, value, "domain")
        elif key == "pomcp":
            base = dataclasses.asdict(default_pomcp())
            if value is not None and not isinstance(value, dict):
                raise ConfigError("pomcp", "expected a mapping")
            base.update(value or {})
            kwargs[key] = _build(PlannerConfig, base, "pomcp")
        elif key in ("observation_rates", "planners"):
            if not isinstance(value, list):
                raise ConfigError(key, "expected a list")
            if key == "observation_rates":
                if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                    raise ConfigError(key, "entries must be numbers")
                value = [float(v) for v in value]
            else:
                value = [str(v) for v in value]
            kwargs[key] = value
        elif key == "noise_pairs":
            if not isinstance(value, list):
                raise ConfigError(key, "expected a list of [true_rate, planner_rate] pairs")
            pairs = []
            for pair in value:
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError(key, f"invalid pair {pair!r}")
                pairs.append((float(pair[0]), float(pair[1])))
            kwargs[key] = pairs
        elif key == "planner_attack_rate":
            if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigError(key, f"expected a number or null, got {value!r}")
            kwargs[key] = None if value is None else float(value)
        elif key == "planner":
            kwargs[key] = str(value)
        else:
            kwargs[key] = _coerce(known[key], value, key)
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<root>", str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"unparseable document: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
