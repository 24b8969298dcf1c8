"""NSGA-II genetic programming loop with unit-violation handling modes.

Modes:

``baseline``
    No unit information in selection; dimensional analysis is only attached
    for reporting.
``culling``
    Offspring with any violation are dropped right after variation, before
    their constants are fitted.
``repair``
    Every offspring goes through :func:`unitgp.dim_analysis.repair` before
    fitting.
``multiobjective``
    The violation total is a fourth objective.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dim_analysis import DimReport, RepairFailed, analyze, repair
from ..expr import (
    EMPIRICAL_FUNCTIONS,
    ExprTree,
    TreeConfig,
    complexity,
    constant_perturbation,
    point_mutation,
    random_tree,
    render,
    structure_key,
    subtree_crossover,
    subtree_mutation,
)
from ..fitting import FitResult, FitSettings, fit_constants
from ..units import Op
from .nsga2 import crowding_distance, nondominated_sort

__all__ = [
    "Mode",
    "RunConfig",
    "Individual",
    "GenerationStats",
    "RunResult",
    "ConfigError",
    "Evaluator",
    "cull",
    "extract_front",
    "front_violating_fraction",
    "run",
]

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    BASELINE = "baseline"
    CULLING = "culling"
    REPAIR = "repair"
    MULTIOBJECTIVE = "multiobjective"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise ConfigError(f"invalid mode {value!r}; choose from "
                              f"{', '.join(m.value for m in cls)}") from None


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: Mode = Mode.BASELINE
    population_size: int = 500
    max_complexity: int = 30
    function_set: Tuple[Op, ...] = EMPIRICAL_FUNCTIONS
    time_budget: Optional[float] = None
    generation_budget: Optional[int] = None
    seed: int = 0
    p_crossover: float = 0.5
    p_subtree_mutation: float = 0.2
    p_point_mutation: float = 0.2
    p_constant_mutation: float = 0.1
    p_constant: float = 0.3
    init_depth: Tuple[int, int] = (2, 5)
    tournament_size: int = 2
    oversampling: int = 5
    fit: FitSettings = field(default_factory=FitSettings)
    threads: int = 1
    audit: bool = False

    def validate(self) -> "RunConfig":
        self.mode = Mode.parse(self.mode)
        if (self.time_budget is None) == (self.generation_budget is None):
            raise ConfigError("set exactly one of time_budget and generation_budget")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ConfigError("time_budget must be positive")
        if self.generation_budget is not None and self.generation_budget < 0:
            raise ConfigError("generation_budget must be >= 0")
        if self.population_size < 10:
            raise ConfigError("population_size must be >= 10")
        if self.max_complexity < 2:
            raise ConfigError("max_complexity must be >= 2")
        probs = self.operator_probabilities
        if min(probs) < 0 or sum(probs) <= 0:
            raise ConfigError("operator probabilities must be non-negative with a positive sum")
        if not self.function_set:
            raise ConfigError("function_set is empty")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    @property
    def operator_probabilities(self) -> Tuple[float, float, float, float]:
        return (self.p_crossover, self.p_subtree_mutation, self.p_point_mutation,
                self.p_constant_mutation)

    def tree_config(self, n_features: int) -> TreeConfig:
        return TreeConfig(n_features=n_features, function_set=tuple(self.function_set),
                          max_complexity=self.max_complexity, init_depth=self.init_depth,
                          p_constant=self.p_constant)


@dataclass
class Individual:
    tree: ExprTree
    fit: FitResult
    dim: DimReport
    objectives: Tuple[float, ...]
    key: str = ""
    rank: int = 0
    crowding: float = 0.0

    @property
    def mse(self) -> float:
        return self.objectives[0]

    @property
    def complexity(self) -> int:
        return int(self.objectives[1])

    @property
    def violations(self) -> float:
        return float(self.dim.violations)

    @property
    def n_constants(self) -> int:
        return self.tree.n_constants

    def render(self) -> str:
        return render(self.tree)


@dataclass
class GenerationStats:
    generation: int
    elapsed: float
    population_size: int
    front_size: int
    best_mse: float
    violating_fraction: float
    mean_constants: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    config: RunConfig
    front: List[Individual]
    population: List[Individual]
    stats: List[GenerationStats]
    generations: int
    elapsed: float


def _stable_seed(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\0")
    return int.from_bytes(h.digest(), "little")


class Evaluator:
    """Fits, analyses and scores trees, caching per tree structure.

    Every random draw made while scoring a structure comes from a generator
    seeded by (run seed, structure), so a score does not depend on the order
    or thread in which trees are evaluated.
    """

    def __init__(self, data, mode: Mode, seed: int, fit_settings: FitSettings = FitSettings(),
                 threads: int = 1, cache_limit: int = 200_000):
        self.data = data
        self.mode = mode
        self.seed = seed
        self.fit_settings = fit_settings
        self.threads = threads
        self.cache_limit = cache_limit
        self.var_units = tuple(data.feature_units)
        self.target_unit = data.target_unit
        self._fits: Dict[str, FitResult] = {}
        self._dims: Dict[str, DimReport] = {}
        self.n_fits = 0

    def rng(self, key: str, purpose: str) -> np.random.Generator:
        return np.random.default_rng(_stable_seed(self.seed, purpose, key))

    def dim(self, tree: ExprTree, key: Optional[str] = None) -> DimReport:
        key = key or structure_key(tree)
        rep = self._dims.get(key)
        if rep is None:
            rep = analyze(tree, self.var_units, self.target_unit, self.rng(key, "dim"))
            self._dims[key] = rep
        return rep

    def _fit(self, tree: ExprTree, key: str) -> FitResult:
        return fit_constants(tree, self.data, self.rng(key, "fit"), self.fit_settings)

    def evaluate(self, trees: Sequence[ExprTree]) -> List[Individual]:
        keys = [structure_key(t) for t in trees]
        todo: Dict[str, ExprTree] = {}
        for k, t in zip(keys, trees):
            if k not in self._fits and k not in todo:
                todo[k] = t
        if len(self._fits) + len(todo) > self.cache_limit:
            self._fits.clear()
            self._dims.clear()
        if todo:
            items = list(todo.items())
            if self.threads > 1 and len(items) > 1:
                with ThreadPoolExecutor(self.threads) as pool:
                    results = list(pool.map(lambda kv: self._fit(kv[1], kv[0]), items))
            else:
                results = [self._fit(t, k) for k, t in items]
            for (k, _), res in zip(items, results):
                self._fits[k] = res
            self.n_fits += len(items)
        out = []
        for k, t in zip(keys, trees):
            fit = self._fits[k]
            dim = self.dim(t, k)
            fitted = t.with_constants(fit.constants)
            objs = (fit.mse, float(complexity(t)), fit.spearman_support)
            if self.mode is Mode.MULTIOBJECTIVE:
                objs = objs + (float(dim.violations),)
            out.append(Individual(fitted, fit, dim, objs, key=k))
        return out


def cull(offspring: Sequence[ExprTree], var_units, target_unit, rng: np.random.Generator) -> List[ExprTree]:
    """Keep only the trees with zero violations (run before any fitting)."""
    return [t for t in offspring if analyze(t, var_units, target_unit, rng).violations == 0]


# -- selection -----------------------------------------------------------------

def _assign_rank_crowding(pop: List[Individual]) -> List[List[int]]:
    fronts = nondominated_sort([ind.objectives for ind in pop])
    for r, front in enumerate(fronts):
        cd = crowding_distance([pop[i].objectives for i in front])
        for i, d in zip(front, cd):
            pop[i].rank = r
            pop[i].crowding = d
    return fronts


def _environmental_selection(combined: List[Individual], size: int) -> List[Individual]:
    # distinct structures first; duplicates only fill remaining places
    seen = set()
    unique, dupes = [], []
    for ind in combined:
        (dupes if ind.key in seen else unique).append(ind)
        seen.add(ind.key)
    pool = unique if len(unique) >= size else unique + dupes
    fronts = _assign_rank_crowding(pool)
    chosen: List[Individual] = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(pool[i] for i in front)
            continue
        rest = sorted(front, key=lambda i: -pool[i].crowding)
        chosen.extend(pool[i] for i in rest[: size - len(chosen)])
        break
    return chosen


def _tournament(pop: List[Individual], rng: np.random.Generator, k: int) -> Individual:
    idx = rng.integers(len(pop), size=k)
    best = pop[int(idx[0])]
    for i in idx[1:]:
        c = pop[int(i)]
        if c.rank < best.rank or (c.rank == best.rank and c.crowding > best.crowding):
            best = c
    return best


# -- reporting -----------------------------------------------------------------

def extract_front(population: Sequence[Individual], mode) -> List[Individual]:
    """Reportable non-dominated set of a population.

    Uses (mse, complexity), plus the violation total in multi-objective
    mode. Identical objective vectors collapse to the member with the fewest
    violations, so outside multi-objective mode there is one equation per
    complexity level. Sorted by complexity, then violations.
    """
    if not population:
        raise ValueError("population is empty")
    mode = Mode.parse(mode)

    def report_vec(ind: Individual):
        v = (ind.mse, float(ind.complexity))
        return v + (ind.violations,) if mode is Mode.MULTIOBJECTIVE else v

    best: Dict[tuple, Individual] = {}
    for ind in population:
        vec = report_vec(ind)
        cur = best.get(vec)
        if cur is None or (ind.violations, ind.fit.spearman_support, ind.key) < \
                (cur.violations, cur.fit.spearman_support, cur.key):
            best[vec] = ind
    members = list(best.values())
    first = nondominated_sort([report_vec(m) for m in members])[0]
    front = [members[i] for i in first]
    front.sort(key=lambda m: (m.complexity, m.violations, m.mse, m.key))
    assert front, "population is non-empty so the first front is too"
    return front


def front_violating_fraction(front: Sequence[Individual], mode) -> float:
    """Share of unit-violating front solutions.

    In multi-objective mode each complexity level counts once, using its
    lowest violation total.
    """
    if not front:
        return 0.0
    if Mode.parse(mode) is Mode.MULTIOBJECTIVE:
        lowest: Dict[int, float] = {}
        for m in front:
            lowest[m.complexity] = min(lowest.get(m.complexity, math.inf), m.violations)
        return sum(1 for v in lowest.values() if v > 0) / len(lowest)
    return sum(1 for m in front if m.violations > 0) / len(front)


def _stats(gen: int, elapsed: float, pop: List[Individual], mode: Mode) -> GenerationStats:
    front = extract_front(pop, mode)
    return GenerationStats(
        generation=gen,
        elapsed=elapsed,
        population_size=len(pop),
        front_size=len(front),
        best_mse=min(ind.mse for ind in pop),
        violating_fraction=front_violating_fraction(front, mode),
        mean_constants=float(np.mean([m.n_constants for m in front])),
    )


# -- the loop ------------------------------------------------------------------

class _Breeder:
    def __init__(self, config: RunConfig, tree_config: TreeConfig, evaluator: Evaluator,
                 rng: np.random.Generator):
        self.config = config
        self.tc = tree_config
        self.ev = evaluator
        self.rng = rng
        p = np.asarray(config.operator_probabilities, dtype=float)
        self.cum = np.cumsum(p / p.sum())

    def _valid(self, tree: ExprTree) -> bool:
        return self.ev.dim(tree).violations == 0

    def _repair(self, tree: ExprTree) -> Optional[ExprTree]:
        key = structure_key(tree)
        try:
            return repair(tree, self.ev.var_units, self.ev.target_unit,
                          self.ev.rng(key, "repair"), self.config.max_complexity)
        except RepairFailed:
            return None

    def _handle(self, tree: ExprTree) -> Optional[ExprTree]:
        mode = self.config.mode
        if mode is Mode.CULLING:
            return tree if self._valid(tree) else None
        if mode is Mode.REPAIR:
            return self._repair(tree)
        return tree

    def _variation(self, parents: List[Individual]) -> List[ExprTree]:
        r = self.rng.random()
        k = self.config.tournament_size
        a = _tournament(parents, self.rng, k).tree
        if r < self.cum[0]:
            b = _tournament(parents, self.rng, k).tree
            return list(subtree_crossover(a, b, self.rng, self.tc))
        if r < self.cum[1]:
            return [subtree_mutation(a, self.tc, self.rng)]
        if r < self.cum[2]:
            return [point_mutation(a, self.tc, self.rng)]
        return [constant_perturbation(a, self.tc, self.rng)]

    def fresh_valid(self) -> ExprTree:
        """A random tree that passes the mode's unit handling."""
        while True:
            tree = random_tree(self.tc, self.rng)
            if self.config.mode in (Mode.CULLING, Mode.REPAIR):
                if self.config.mode is Mode.CULLING and self._valid(tree):
                    return tree
                fixed = self._repair(tree)
                if fixed is not None:
                    return fixed
            else:
                return tree

    def _fill(self, produce, n: int) -> List[ExprTree]:
        out: List[ExprTree] = []
        attempts = 0
        cap = self.config.oversampling * n
        while len(out) < n and attempts < cap:
            for tree in produce():
                attempts += 1
                handled = self._handle(tree)
                if handled is not None and len(out) < n:
                    out.append(handled)
        while len(out) < n:
            out.append(self.fresh_valid())
        return out

    def initial(self, n: int) -> List[ExprTree]:
        return self._fill(lambda: [random_tree(self.tc, self.rng)], n)

    def offspring(self, parents: List[Individual], n: int) -> List[ExprTree]:
        return self._fill(lambda: self._variation(parents), n)


def _audit(pop: Sequence[Individual], ev: Evaluator, gen: int) -> None:
    for ind in pop:
        rep = analyze(ind.tree, ev.var_units, ev.target_unit, np.random.default_rng(0))
        if rep.violations != 0:
            raise AssertionError(f"generation {gen}: {ind.render()} has {rep.violations} violations")


def run(config: RunConfig, data) -> RunResult:
    """Evolve a population on ``data`` until the configured budget is spent."""
    config.validate()
    mode = config.mode
    if mode is not Mode.BASELINE and data.target_unit is None:
        raise ConfigError(f"mode {mode.value} needs unit information")
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    tc = config.tree_config(data.n_features)
    ev = Evaluator(data, mode, config.seed, config.fit, config.threads)
    breeder = _Breeder(config, tc, ev, rng)
    audit = config.audit and mode in (Mode.CULLING, Mode.REPAIR)

    pop = ev.evaluate(breeder.initial(config.population_size))
    _assign_rank_crowding(pop)
    stats = [_stats(0, time.perf_counter() - start, pop, mode)]
    if audit:
        _audit(pop, ev, 0)
    gen = 0
    while True:
        elapsed = time.perf_counter() - start
        if config.generation_budget is not None and gen >= config.generation_budget:
            break
        if config.time_budget is not None and elapsed >= config.time_budget:
            break
        children = ev.evaluate(breeder.offspring(pop, config.population_size))
        pop = _environmental_selection(pop + children, config.population_size)
        gen += 1
        if audit:
            _audit(pop, ev, gen)
        stats.append(_stats(gen, time.perf_counter() - start, pop, mode))
        log.debug("gen %d: front %d, best mse %.3g", gen, stats[-1].front_size, stats[-1].best_mse)
    front = extract_front(pop, mode)
    return RunResult(config, front, pop, stats, gen, time.perf_counter() - start)
