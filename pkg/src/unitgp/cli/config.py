"""Experiment settings from a flat ``key = value`` file, ``UNITGP_*`` variables and flags.

Later sources win: defaults, then the file, then the environment, then
command-line flags. Keys are the :class:`ExperimentConfig` field names or the
:class:`~unitgp.evolution.RunConfig` field names.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

from ..evolution import ConfigError, Mode, RunConfig
from ..expr import EMPIRICAL_FUNCTIONS
from ..units import Op

__all__ = ["ExperimentConfig", "parse_budget", "parse_function_set", "read_config_file",
           "env_overrides", "build_config", "ENV_PREFIX"]

ENV_PREFIX = "UNITGP_"

# default function sets by dataset kind
FUNCTION_SETS = {
    "empirical": EMPIRICAL_FUNCTIONS,
    "fluid": tuple(Op.from_symbol(s) for s in ("+", "-", "*", "/", "exp", "log", "sin", "cos", "^")),
    "thermo": tuple(Op.from_symbol(s) for s in ("+", "-", "*", "/", "exp", "log", "^")),
}


def parse_budget(text: str) -> Tuple[Optional[float], Optional[int]]:
    """``"120s"`` -> (120.0, None); ``"50g"`` -> (None, 50). Bare numbers are seconds."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([sSgG]?)\s*", str(text))
    if not m:
        raise ConfigError(f"--budget: expected e.g. '120s' or '50g', got {text!r}")
    value, unit = m.group(1), m.group(2).lower()
    if unit == "g":
        if "." in value:
            raise ConfigError(f"--budget: generation count must be an integer, got {text!r}")
        return None, int(value)
    return float(value), None


def parse_function_set(text: str) -> Tuple[Op, ...]:
    text = text.strip()
    if text.lower() in FUNCTION_SETS:
        return FUNCTION_SETS[text.lower()]
    try:
        return tuple(Op.from_symbol(tok.strip()) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"function_set: {exc}") from None


@dataclass
class ExperimentConfig:
    benchmark: Optional[str] = None
    dataset: Optional[str] = None
    noise: float = 0.0
    n_samples: int = 100
    seeds: int = 5
    first_seed: int = 0
    out_dir: str = "unitgp-out"
    threads: int = 1
    deterministic: bool = False
    run: RunConfig = field(default_factory=lambda: RunConfig(time_budget=120.0))

    def validate(self) -> "ExperimentConfig":
        if (self.benchmark is None) == (self.dataset is None):
            raise ConfigError("give exactly one of --benchmark and --dataset")
        if self.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if self.noise < 0:
            raise ConfigError("--noise must be non-negative")
        self.run.validate()
        return self


_EXPERIMENT_KEYS = {f.name for f in fields(ExperimentConfig)} - {"run"}
_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"fit"}
_ALIASES = {"pop": "population_size", "mode": "mode", "budget": "budget",
            "max_iterations": "fit_max_iterations"}


def read_config_file(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    environ = os.environ if environ is None else environ
    return {k[len(ENV_PREFIX):].lower(): v for k, v in environ.items() if k.startswith(ENV_PREFIX)}


def _as_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _convert(key: str, value, target_type):
    if value is None or (isinstance(value, str) and value.lower() == "none"):
        return None
    try:
        if target_type is bool:
            return _as_bool(key, value)
        if target_type is int:
            return int(value)
        if target_type is float:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {value!r} as {target_type.__name__}") from None
    return value


_TYPES = {
    "noise": float, "n_samples": int, "seeds": int, "first_seed": int, "threads": int,
    "deterministic": bool, "population_size": int, "max_complexity": int,
    "time_budget": float, "generation_budget": int, "seed": int, "p_crossover": float,
    "p_subtree_mutation": float, "p_point_mutation": float, "p_constant_mutation": float,
    "p_constant": float, "tournament_size": int, "oversampling": int, "audit": bool,
    "fit_max_iterations": int, "fit_starts": int,
}


def apply_settings(cfg: ExperimentConfig, settings: Mapping[str, object]) -> ExperimentConfig:
    from ..fitting import FitSettings

    for raw_key, value in settings.items():
        key = _ALIASES.get(raw_key.replace("-", "_"), raw_key.replace("-", "_"))
        if value is None:
            continue
        if key == "budget":
            cfg.run.time_budget, cfg.run.generation_budget = parse_budget(str(value))
        elif key == "mode":
            try:
                cfg.run.mode = Mode.parse(value)
            except ConfigError as exc:
                raise ConfigError(f"--mode: {exc}") from None
        elif key == "function_set":
            cfg.run.function_set = value if isinstance(value, tuple) else parse_function_set(str(value))
        elif key in ("fit_max_iterations", "fit_starts"):
            n = _convert(key, value, int)
            fs = cfg.run.fit
            cfg.run.fit = FitSettings(n_starts=n if key == "fit_starts" else fs.n_starts,
                                      max_iterations=n if key == "fit_max_iterations" else fs.max_iterations,
                                      tolerance=fs.tolerance, log10_range=fs.log10_range)
        elif key in ("time_budget", "generation_budget"):
            v = _convert(key, value, _TYPES[key])
            setattr(cfg.run, key, v)
            if v is not None:
                other = "generation_budget" if key == "time_budget" else "time_budget"
                setattr(cfg.run, other, None)
        elif key in _EXPERIMENT_KEYS:
            setattr(cfg, key, _convert(key, value, _TYPES.get(key, str)))
        elif key in _RUN_KEYS:
            setattr(cfg.run, key, _convert(key, value, _TYPES.get(key, str)))
        else:
            raise ConfigError(f"unknown setting {raw_key!r}")
    return cfg


def build_config(config_file=None, environ: Optional[Mapping[str, str]] = None,
                 flags: Optional[Mapping[str, object]] = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if config_file:
        apply_settings(cfg, read_config_file(config_file))
    apply_settings(cfg, env_overrides(environ))
    if flags:
        apply_settings(cfg, flags)
    if cfg.deterministic:
        cfg.threads = 1
    cfg.run.threads = 1
    return cfg.validate()
