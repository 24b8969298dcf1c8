"""NSGA-II genetic programming with unit-violation handling."""

from .engine import (
    ConfigError,
    Evaluator,
    GenerationStats,
    Individual,
    Mode,
    RunConfig,
    RunResult,
    cull,
    extract_front,
    front_violating_fraction,
    run,
)
from .nsga2 import BOUNDARY, crowding_distance, dominates, nondominated_sort

__all__ = [
    "BOUNDARY",
    "ConfigError",
    "Evaluator",
    "GenerationStats",
    "Individual",
    "Mode",
    "RunConfig",
    "RunResult",
    "crowding_distance",
    "cull",
    "dominates",
    "extract_front",
    "front_violating_fraction",
    "nondominated_sort",
    "run",
]
