"""Constant fitting and the error/support objectives."""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import rankdata

from .expr import ExprTree, _columns, compile_node

__all__ = ["WORST_MSE", "WORST_SUPPORT", "FitResult", "FitSettings", "mse",
           "spearman_support", "fit_constants"]

# finite so that dominance comparisons stay total
WORST_MSE = sys.float_info.max / 4
WORST_SUPPORT = 2.0

# stand-in for non-finite residuals handed to the optimizer
_BIG_RESIDUAL = 1e100


@dataclass(frozen=True)
class FitResult:
    constants: Tuple[float, ...]
    mse: float
    spearman_support: float


@dataclass(frozen=True)
class FitSettings:
    n_starts: int = 3
    max_iterations: int = 100
    tolerance: float = 1e-10
    log10_range: Tuple[float, float] = (-12.0, 12.0)


def mse(predictions, targets) -> float:
    """Mean squared residual; any non-finite prediction gives :data:`WORST_MSE`."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if not np.all(np.isfinite(p)):
        return WORST_MSE
    with np.errstate(over="ignore"):
        value = float(np.mean((p - t) ** 2))
    return value if np.isfinite(value) and value < WORST_MSE else WORST_MSE


def spearman_support(predictions, targets) -> float:
    """``1 - |rho|`` for the Spearman rank correlation (average ranks for ties).

    Constant predictions have no defined correlation and score 1; non-finite
    predictions score 2.
    """
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if not np.all(np.isfinite(p)):
        return WORST_SUPPORT
    rp = rankdata(p) - (len(p) + 1) / 2.0
    rt = rankdata(t) - (len(t) + 1) / 2.0
    denom = np.sqrt(np.dot(rp, rp) * np.dot(rt, rt))
    if denom == 0.0:
        return 1.0
    rho = float(np.dot(rp, rt) / denom)
    return 1.0 - min(abs(rho), 1.0)


def _starts(n: int, rng: np.random.Generator, settings: FitSettings):
    yield np.ones(n)
    lo, hi = settings.log10_range
    for _ in range(settings.n_starts - 1):
        magnitude = 10.0 ** rng.uniform(lo, hi, size=n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        yield sign * magnitude


def fit_constants(tree: ExprTree, data, rng: np.random.Generator,
                  settings: FitSettings = FitSettings(),
                  fixed: Optional[Mapping[int, float]] = None) -> FitResult:
    """Least-squares fit of the constant slots of ``tree`` against ``data.targets``.

    Runs a damped least-squares (Levenberg-Marquardt) search with finite
    difference sensitivities from each start point; the best start wins. The
    input tree is left untouched. Never raises: failed fits get the worst
    objective values.

    ``fixed`` pins slots to given values; only the remaining slots are fitted
    and the returned constants cover every slot.
    """
    y = np.asarray(data.targets, dtype=float)
    cols = _columns(data)
    fn = compile_node(tree.root)
    fixed = dict(fixed or {})
    free = [i for i in range(tree.n_constants) if i not in fixed]

    def full(c):
        if not fixed:
            return np.asarray(c, dtype=float)
        out = np.empty(tree.n_constants)
        for i, v in fixed.items():
            out[i] = v
        out[free] = c
        return out

    def predict(c):
        out = fn(cols, full(c))
        if isinstance(out, np.ndarray) and out.shape == y.shape:
            return out
        return np.broadcast_to(np.asarray(out, dtype=float), y.shape)

    # one errstate for the whole fit; entering it per call costs more than the model
    with np.errstate(all="ignore"):
        return _fit(predict, full, y, len(free), rng, settings)


def _fit(predict, full, y, n, rng, settings) -> FitResult:
    if n == 0:
        p = predict(())
        return FitResult(tuple(float(v) for v in full(())), mse(p, y), spearman_support(p, y))

    def residuals(c):
        r = predict(c) - y
        if not np.isfinite(r).all():
            r[~np.isfinite(r)] = _BIG_RESIDUAL
        return r

    method = "lm" if len(y) >= n else "trf"
    best_c, best_mse = None, np.inf
    for start in _starts(n, rng, settings):
        candidates = [start]
        if np.all(np.isfinite(predict(start))):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    sol = least_squares(residuals, start, method=method,
                                        ftol=settings.tolerance, xtol=1e-12, gtol=1e-12,
                                        max_nfev=settings.max_iterations * (n + 1))
                candidates.append(sol.x)
            except (ValueError, FloatingPointError, np.linalg.LinAlgError):
                pass
        for c in candidates:
            m = mse(predict(c), y)
            if m < best_mse:
                best_c, best_mse = np.array(c, dtype=float), m
    p = predict(best_c)
    return FitResult(tuple(float(v) for v in full(best_c)), best_mse, spearman_support(p, y))
