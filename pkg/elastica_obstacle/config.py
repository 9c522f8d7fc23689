"""Run configuration: built-in defaults, environment, config file and CLI flags.

Precedence is CLI flag > config file > environment > default. Config files
are flat `key=value` files read with python-dotenv; keys use dotted names
such as `obstacle.h` or `grid.N`.
"""
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from dotenv import dotenv_values

from .energy import ShapeFunction, shape_function_by_name
from .exceptions import ConfigError, ElasticaError
from .solver import DEFAULT_EPSILON_SCHEDULE, Obstacle, SolverOptions

logger = logging.getLogger(__name__)

COMMANDS = ("curve", "solve", "threshold", "hbound", "sweep", "figures")
FORMATS = ("csv", "json", "svg")
OBSTACLE_KINDS = ("symmetric_cone", "cone", "sampled")
METHODS = ("lbfgsb", "projected-gradient")

# config file key -> RunConfig attribute
FILE_KEYS = {
    "p": "p",
    "G": "G",
    "lambda": "lam",
    "samples": "samples",
    "obstacle.kind": "obstacle_kind",
    "obstacle.h": "height",
    "obstacle.theta": "theta",
    "obstacle.endpoint": "endpoint",
    "obstacle.file": "obstacle_file",
    "grid.N": "N",
    "tol": "tol",
    "max_iter": "max_iter",
    "symmetric": "symmetric",
    "epsilon_schedule": "epsilon_schedule",
    "method": "method",
}


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot read '{value}' as a boolean")


def _parse_floats(value: Any) -> Tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [part for part in str(value).replace(" ", "").split(",") if part]
    try:
        return tuple(float(item) for item in items)
    except ValueError as e:
        raise ConfigError(f"cannot read '{value}' as a list of numbers") from e


_PARSERS = {
    "p": float,
    "lam": float,
    "samples": int,
    "height": float,
    "theta": float,
    "endpoint": float,
    "N": int,
    "tol": float,
    "max_iter": int,
    "symmetric": _parse_bool,
    "epsilon_schedule": _parse_floats,
    "p_list": _parse_floats,
    "h_list": _parse_floats,
}


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


@dataclass
class RunConfig:
    """Fully resolved parameters of one CLI run."""

    command: str = "solve"
    p: float = 2.0
    G: str = "eu_p"
    lam: float = 1.0
    samples: int = 2048
    obstacle_kind: str = "symmetric_cone"
    height: Optional[float] = None
    theta: float = 0.5
    endpoint: float = -0.25
    obstacle_file: Optional[str] = None
    N: int = field(default_factory=lambda: _env_int("ELASTICA_GRID_N", 512))
    tol: float = field(default_factory=lambda: _env_float("ELASTICA_TOL", 5e-7))
    max_iter: int = field(default_factory=lambda: _env_int("ELASTICA_MAX_ITER", 20000))
    symmetric: bool = False
    epsilon_schedule: Tuple[float, ...] = DEFAULT_EPSILON_SCHEDULE
    method: str = "lbfgsb"
    out: str = "results"
    fmt: str = "csv"
    with_exact: bool = False
    force: bool = False
    figures: bool = False
    p_list: Tuple[float, ...] = (1.5, 2.0, 3.0)
    h_list: Tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    workers: int = field(default_factory=lambda: _env_int("ELASTICA_WORKERS", 4))
    config_file: Optional[str] = None

    @classmethod
    def from_sources(
        cls, command: str, overrides: Optional[Dict[str, Any]] = None, config_file: Optional[str] = None
    ) -> "RunConfig":
        """Merge defaults/environment, an optional config file and CLI overrides."""
        try:
            config = cls(command=command, config_file=config_file)
        except ValueError as e:
            raise ConfigError(f"invalid environment setting: {e}") from e
        if config_file:
            config._apply(read_config_file(config_file))
        config._apply({k: v for k, v in (overrides or {}).items() if v is not None})
        config.validate()
        return config

    def _apply(self, values: Dict[str, Any]) -> None:
        for key, raw in values.items():
            if not hasattr(self, key):
                raise ConfigError(f"unknown configuration key '{key}'")
            parser = _PARSERS.get(key)
            try:
                value = parser(raw) if parser is not None else raw
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid value '{raw}' for '{key}'") from e
            setattr(self, key, value)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'")
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if self.samples < 1:
            raise ConfigError(f"samples must be at least 1, got {self.samples}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got '{self.fmt}'")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got '{self.method}'")
        if self.obstacle_kind not in OBSTACLE_KINDS:
            raise ConfigError(f"obstacle.kind must be one of {OBSTACLE_KINDS}, got '{self.obstacle_kind}'")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter at least 1")
        if self.workers < 1:
            raise ConfigError(f"ELASTICA_WORKERS must be at least 1, got {self.workers}")
        if any(not e >= 0 for e in self.epsilon_schedule):
            raise ConfigError("epsilon_schedule entries must be non-negative")
        if self.command == "solve":
            if self.obstacle_kind == "sampled":
                if not self.obstacle_file:
                    raise ConfigError("a sampled obstacle needs an x,psi CSV (--obstacle-file or obstacle.file)")
            elif self.height is None:
                raise ConfigError("solve needs an obstacle height (--height or obstacle.h)")
            if self.N < 64:
                raise ConfigError(f"solve needs grid.N >= 64, got {self.N}")
            if self.symmetric and self.N % 2:
                raise ConfigError(f"symmetric solves need an even grid.N, got {self.N}")
            if not 0 < self.theta < 1:
                raise ConfigError(f"obstacle.theta must lie in (0, 1), got {self.theta}")
            if self.obstacle_kind == "symmetric_cone" and self.theta != 0.5:
                raise ConfigError("a symmetric cone has its tip at theta = 0.5")
        if self.command == "sweep" and (not self.p_list or not self.h_list):
            raise ConfigError("sweep needs non-empty p and h lists")

    # ---------- builders ----------

    def shape_function(self) -> ShapeFunction:
        try:
            return shape_function_by_name(self.G, self.p)
        except ElasticaError as e:
            raise ConfigError(str(e)) from e

    def obstacle(self) -> Obstacle:
        if self.obstacle_kind == "sampled":
            if not self.obstacle_file:
                raise ConfigError("no obstacle file configured")
            try:
                return Obstacle.from_csv(self.obstacle_file)
            except ElasticaError as e:
                raise ConfigError(str(e)) from e
        if self.height is None:
            raise ConfigError("no obstacle height configured")
        if self.obstacle_kind == "symmetric_cone":
            return Obstacle.symmetric_cone(self.height, self.endpoint)
        return Obstacle.cone(self.theta, self.height, self.endpoint, self.endpoint)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            N=self.N,
            tol=self.tol,
            max_iter=self.max_iter,
            symmetric=self.symmetric,
            method=self.method,
            epsilon_schedule=self.epsilon_schedule,
        )

    def resolved(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("epsilon_schedule", "p_list", "h_list"):
            data[key] = list(data[key])
        return data


def read_config_file(path: str) -> Dict[str, Any]:
    """Read a flat key=value file and map its dotted keys to RunConfig names."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    mapped: Dict[str, Any] = {}
    unknown: List[str] = []
    for key, value in raw.items():
        if key not in FILE_KEYS:
            unknown.append(key)
            continue
        if value is None or value == "":
            raise ConfigError(f"config key '{key}' has no value in {path}")
        mapped[FILE_KEYS[key]] = value
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    logger.info(f"Loaded {len(mapped)} settings from {path}")
    return mapped
