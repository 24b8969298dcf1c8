"""Unit-aware genetic programming for symbolic regression.

Expression trees over SI-unit-annotated variables are evolved with NSGA-II;
dimensional violations are counted and either ignored, culled, repaired or
minimised as an extra objective.
"""

from .benchmarks import BENCHMARKS, Dataset, apply_noise, generate, get_benchmark, load_csv, save_csv
from .dim_analysis import DimReport, RepairFailed, analyze, repair
from .evolution import Mode, RunConfig, RunResult, nondominated_sort, run
from .expr import ExprTree, complexity, evaluate, parse, render
from .fitting import FitResult, fit_constants
from .units import DIMENSIONLESS, JOKER, UnitVector, format_unit, parse_unit

__version__ = "0.1.0"

__all__ = [
    "BENCHMARKS", "DIMENSIONLESS", "Dataset", "DimReport", "ExprTree", "FitResult", "JOKER",
    "Mode", "RepairFailed", "RunConfig", "RunResult", "UnitVector", "analyze", "apply_noise",
    "complexity", "evaluate", "fit_constants", "format_unit", "generate", "get_benchmark",
    "load_csv", "nondominated_sort", "parse", "parse_unit", "render", "repair", "run", "save_csv",
]
