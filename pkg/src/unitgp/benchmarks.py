"""Datasets: the five empirical-law generators, target noise, and CSV input/output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Tuple, Union

import numpy as np

from .units import UnitVector, format_unit, parse_unit

__all__ = [
    "Dataset",
    "DatasetError",
    "BenchmarkSpec",
    "BENCHMARKS",
    "get_benchmark",
    "generate",
    "apply_noise",
    "load_csv",
    "save_csv",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    feature_names: Tuple[str, ...]
    feature_units: Tuple[UnitVector, ...]
    target_name: str
    target_unit: UnitVector
    rows: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "feature_units", tuple(self.feature_units))
        if len(self.feature_units) != len(self.feature_names):
            raise ValueError("need one unit per feature")
        if rows.shape != (len(targets), len(self.feature_names)):
            raise ValueError(f"rows have shape {rows.shape}, expected "
                             f"({len(targets)}, {len(self.feature_names)})")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_samples(self) -> int:
        return len(self.targets)


class DatasetError(ValueError):
    """Raised for malformed dataset files."""


# -- physical constants ----------------------------------------------------------

MEGAPARSEC = 3.0856775814913673e22  # m
H0 = 70e3 / MEGAPARSEC  # 70 km/s/Mpc in 1/s
G = 6.674e-11
R_GAS = 8.314
R_RYDBERG = 1.0974e7
GM_SUN = 1.327e20
DAY = 86400.0
KEPLER_K = 2.0 * math.pi / math.sqrt(GM_SUN) / DAY  # days per m^(3/2)


def _log_uniform(rng, lo, hi, n):
    return 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), size=n)


def _sample_hubble(rng, n):
    return _log_uniform(rng, 1e22, 1e26, n)[:, None]


def _sample_kepler(rng, n):
    return _log_uniform(rng, 5e10, 5e12, n)[:, None]


def _sample_newton(rng, n):
    m1 = _log_uniform(rng, 1e22, 1e30, n)
    m2 = _log_uniform(rng, 1e22, 1e30, n)
    r = _log_uniform(rng, 1e8, 1e12, n)
    return np.column_stack([m1, m2, r])


def _sample_ideal_gas(rng, n):
    return np.column_stack([rng.uniform(0.1, 10.0, n), rng.uniform(100.0, 1000.0, n),
                            rng.uniform(1e-3, 1.0, n)])


def _sample_rydberg(rng, n):
    pairs = [(a, b) for a in range(1, 6) for b in range(a + 1, 11)]
    idx = rng.integers(len(pairs), size=n)
    return np.array([pairs[i] for i in idx], dtype=float)


@dataclass(frozen=True)
class BenchmarkSpec:
    """One ground-truth law: features, units, sampler, closure and target shape."""

    name: str
    feature_names: Tuple[str, ...]
    feature_units: Tuple[str, ...]
    target_name: str
    target_unit: str
    closure: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    shape: str
    noise_levels: Tuple[float, ...] = (0.0, 0.05, 0.10)
    constants: Dict[str, float] = field(default_factory=dict)
    noise_level: float = 0.0

    def __post_init__(self):
        if self.noise_level < 0:
            raise ValueError("noise level must be non-negative")

    @property
    def units(self) -> Tuple[UnitVector, ...]:
        return tuple(parse_unit(u) for u in self.feature_units)

    @property
    def target_unit_vector(self) -> UnitVector:
        return parse_unit(self.target_unit)

    def with_noise(self, level: float) -> "BenchmarkSpec":
        if not any(math.isclose(level, allowed) for allowed in self.noise_levels):
            raise ValueError(f"{self.name} supports noise levels {self.noise_levels}, got {level}")
        return BenchmarkSpec(**{**self.__dict__, "noise_level": float(level)})


BENCHMARKS: Dict[str, BenchmarkSpec] = {
    spec.name.lower(): spec
    for spec in [
        BenchmarkSpec(
            name="Hubble",
            feature_names=("D",), feature_units=("m",),
            target_name="v", target_unit="m s^-1",
            closure=lambda X: H0 * X[:, 0],
            sampler=_sample_hubble,
            shape="c0 * x0",
            constants={"H0": H0},
        ),
        BenchmarkSpec(
            name="Kepler",
            feature_names=("a",), feature_units=("m",),
            # the period is in days; the day factor lives in the constant
            target_name="P", target_unit="s",
            closure=lambda X: KEPLER_K * np.sqrt(X[:, 0] ** 3),
            sampler=_sample_kepler,
            shape="c0 * sqrt(pow3(x0))",
            constants={"k": KEPLER_K},
        ),
        BenchmarkSpec(
            name="Newton",
            feature_names=("m1", "m2", "r"), feature_units=("kg", "kg", "m"),
            target_name="F", target_unit="m kg s^-2",
            closure=lambda X: G * X[:, 0] * X[:, 1] / X[:, 2] ** 2,
            sampler=_sample_newton,
            shape="c0 * (x0 * x1) / pow2(x2)",
            constants={"G": G},
        ),
        BenchmarkSpec(
            name="IdealGas",
            feature_names=("n", "T", "V"), feature_units=("mol", "K", "m^3"),
            target_name="P", target_unit="m^-1 kg s^-2",
            closure=lambda X: X[:, 0] * R_GAS * X[:, 1] / X[:, 2],
            sampler=_sample_ideal_gas,
            shape="c0 * (x0 * x1) / x2",
            constants={"R": R_GAS},
        ),
        BenchmarkSpec(
            name="Rydberg",
            feature_names=("n1", "n2"), feature_units=("", ""),
            target_name="lambda", target_unit="m",
            closure=lambda X: 1.0 / (R_RYDBERG * (1.0 / X[:, 0] ** 2 - 1.0 / X[:, 1] ** 2)),
            sampler=_sample_rydberg,
            # no literal 1 in the grammar: x/x^3 spells 1/x^2
            shape="c0 / ((x0 / pow3(x0)) - (x1 / pow3(x1)))",
            noise_levels=(0.0, 0.01, 0.03),
            constants={"R_H": R_RYDBERG},
        ),
    ]
}


def get_benchmark(name: str, noise: float = 0.0) -> BenchmarkSpec:
    key = name.lower().replace("_", "").replace("-", "").replace(" ", "")
    if key not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    return BENCHMARKS[key].with_noise(noise)


def apply_noise(targets, level: float, seed) -> np.ndarray:
    """Add Gaussian noise with standard deviation ``level * std(targets)``."""
    y = np.asarray(targets, dtype=float)
    if level < 0:
        raise ValueError("noise level must be non-negative")
    if level == 0:
        return y.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return y + rng.normal(0.0, level * np.std(y, ddof=1), size=y.shape)


def generate(spec: BenchmarkSpec, n_samples: int = 100, seed=0) -> Dataset:
    """Sample features, evaluate the ground truth and add the spec's noise."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    X = spec.sampler(rng, n_samples)
    y = spec.closure(X)
    if spec.noise_level > 0 and n_samples > 1:
        y = apply_noise(y, spec.noise_level, rng)
    return Dataset(spec.feature_names, spec.units, spec.target_name,
                   spec.target_unit_vector, X, y)


def load_csv(path: Union[str, Path]) -> Dataset:
    """Read a dataset: names row, units row, numeric body; the last column is the target."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        lines = list(csv.reader(fh))
    # blank lines are skipped; a units row of empty cells is meaningful
    lines = [row for row in lines if row]
    if len(lines) < 3:
        raise DatasetError(f"{path}: need a names row, a units row and at least one data row")
    names = [c.strip() for c in lines[0]]
    if len(names) < 2:
        raise DatasetError(f"{path}: need at least one feature and one target column")
    if len(lines[1]) != len(names):
        raise DatasetError(f"{path}: units row has {len(lines[1])} cells, expected {len(names)}")
    units = []
    for col, text in enumerate(lines[1]):
        try:
            units.append(parse_unit(text))
        except ValueError as exc:
            raise DatasetError(f"{path}: row 2, column {col + 1} ({names[col]!r}): {exc}") from None
    body = np.empty((len(lines) - 2, len(names)))
    for i, row in enumerate(lines[2:]):
        lineno = i + 3
        if len(row) != len(names):
            raise DatasetError(f"{path}: row {lineno} has {len(row)} cells, expected {len(names)}")
        for col, cell in enumerate(row):
            try:
                body[i, col] = float(cell)
            except ValueError:
                raise DatasetError(f"{path}: row {lineno}, column {col + 1} ({names[col]!r}): "
                                   f"not a number: {cell!r}") from None
    if not np.all(np.isfinite(body)):
        bad = np.argwhere(~np.isfinite(body))[0]
        raise DatasetError(f"{path}: row {bad[0] + 3}, column {bad[1] + 1}: non-finite value")
    return Dataset(tuple(names[:-1]), tuple(units[:-1]), names[-1], units[-1],
                   body[:, :-1], body[:, -1])


def save_csv(data: Dataset, path: Union[str, Path]) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.feature_names) + [data.target_name])
        w.writerow([format_unit(u) for u in data.feature_units] + [format_unit(data.target_unit)])
        for row, y in zip(data.rows, data.targets):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])
