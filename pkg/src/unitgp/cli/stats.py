"""Front statistics pooled over seeds (size, violating share, constants, generations)."""

from __future__ import annotations

import math
import statistics
from typing import Dict, List, Mapping, Optional, Sequence

from ..evolution import Mode

__all__ = ["front_stats", "summarize", "normalize_generations"]


def _get(member, name: str):
    if isinstance(member, Mapping):
        return member[name]
    return getattr(member, name)


def summarize(values: Sequence[float]) -> Dict[str, object]:
    vals = [float(v) for v in values]
    if not vals:
        return {"values": [], "median": None, "mean": None, "min": None, "max": None}
    return {"values": vals, "median": float(statistics.median(vals)),
            "mean": float(statistics.fmean(vals)), "min": min(vals), "max": max(vals)}


def normalize_generations(generations: Sequence[int]) -> List[float]:
    """Divide by the smallest count; ``{100, 150} -> {1.0, 1.5}``."""
    low = min(generations)
    if low <= 0:
        return [math.nan for _ in generations]
    return [g / low for g in generations]


def _violating_pct(front, mode: Mode) -> float:
    if not front:
        return 0.0
    if mode is Mode.MULTIOBJECTIVE:
        # one solution per complexity level: the one with the fewest violations
        lowest: Dict[int, float] = {}
        for m in front:
            c = int(_get(m, "complexity"))
            lowest[c] = min(lowest.get(c, math.inf), float(_get(m, "violations")))
        return 100.0 * sum(1 for v in lowest.values() if v > 0) / len(lowest)
    return 100.0 * sum(1 for m in front if float(_get(m, "violations")) > 0) / len(front)


def front_stats(fronts: Sequence[Sequence], mode="baseline",
                generations: Optional[Sequence[int]] = None) -> Dict[str, object]:
    """Per-seed and pooled metrics for a set of fronts.

    Front members may be mappings (exported records) or objects exposing
    ``complexity``, ``violations`` and ``n_constants``.
    """
    if not fronts:
        raise ValueError("front_stats needs at least one front")
    mode = Mode.parse(mode)
    per_seed = []
    for i, front in enumerate(fronts):
        consts = [int(_get(m, "n_constants")) for m in front]
        per_seed.append({
            "front_size": len(front),
            "violating_pct": _violating_pct(front, mode),
            "mean_constants": float(statistics.fmean(consts)) if consts else 0.0,
        })
    if generations is not None:
        if len(generations) != len(fronts):
            raise ValueError("one generation count per front expected")
        for rec, g, ng in zip(per_seed, generations, normalize_generations(generations)):
            rec["generations"] = int(g)
            rec["normalized_generations"] = ng
    pooled = {
        "front_size": summarize([r["front_size"] for r in per_seed]),
        "violating_pct": summarize([r["violating_pct"] for r in per_seed]),
        "mean_constants": summarize([r["mean_constants"] for r in per_seed]),
    }
    if generations is not None:
        pooled["generations"] = summarize([r["generations"] for r in per_seed])
        pooled["normalized_generations"] = summarize([r["normalized_generations"] for r in per_seed])
    return {"mode": mode.value, "per_seed": per_seed, "pooled": pooled}
