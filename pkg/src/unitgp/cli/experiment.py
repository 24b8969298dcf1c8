"""Running one configuration over several seeds and writing the reports.

Layout of ``out_dir``::

    seed<N>.front.jsonl   one record per front member
    seed<N>.stats.jsonl   one record per generation
    seed<N>.run.json      verdict, wall-clock, generations, error
    aggregate.json        verdicts and front statistics over all seeds
    summary.txt           correct/almost/wrong table row
"""

from __future__ import annotations

import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

from ..benchmarks import DatasetError, generate, get_benchmark, load_csv
from ..evolution import ConfigError, run
from ..units import format_unit
from .config import ExperimentConfig
from .recovery import Verdict, classify_recovery
from .stats import front_stats

__all__ = ["RunReport", "ExperimentReport", "front_records", "run_experiment", "load_dataset",
           "format_summary", "read_run_dir"]


@dataclass
class RunReport:
    seed: int
    front: List[dict] = field(default_factory=list)
    stats: List[dict] = field(default_factory=list)
    verdict: Optional[str] = None
    wall_clock: float = 0.0
    generations: int = 0
    error: Optional[str] = None

    def meta(self) -> dict:
        return {"seed": self.seed, "verdict": self.verdict, "wall_clock": self.wall_clock,
                "generations": self.generations, "front_size": len(self.front),
                "error": self.error}


@dataclass
class ExperimentReport:
    label: str
    mode: str
    benchmark: Optional[str]
    noise: float
    runs: List[RunReport]
    stats: Optional[dict] = None

    @property
    def verdict_counts(self) -> Optional[Dict[str, int]]:
        if self.benchmark is None:
            return None
        counts = {v.value: 0 for v in Verdict}
        for r in self.runs:
            if r.verdict is not None:
                counts[r.verdict] += 1
        return counts

    @property
    def failures(self) -> int:
        return sum(1 for r in self.runs if r.error is not None)

    def as_dict(self) -> dict:
        return {"label": self.label, "mode": self.mode, "benchmark": self.benchmark,
                "noise": self.noise, "verdicts": self.verdict_counts,
                "almost_rule": "shape match after deleting at most 2 surplus constants",
                "runs": [r.meta() for r in self.runs], "front_stats": self.stats}


def front_records(front) -> List[dict]:
    """Export form of a front; contains nothing run-time dependent."""
    out = []
    for m in front:
        out.append({
            "equation": m.render(),
            "structure": m.key,
            "mse": m.mse,
            "complexity": m.complexity,
            "spearman_support": m.fit.spearman_support,
            "violations": float(m.dim.violations),
            "violations_exact": str(m.dim.violations),
            "internal_violations": m.dim.internal,
            "output_unit": format_unit(m.dim.output_unit),
            "n_constants": m.n_constants,
        })
    return out


def load_dataset(cfg: ExperimentConfig, seed: int):
    if cfg.benchmark is not None:
        try:
            spec = get_benchmark(cfg.benchmark, cfg.noise)
        except (KeyError, ValueError) as exc:
            msg = exc.args[0] if exc.args else str(exc)
            raise ConfigError(f"--benchmark/--noise: {msg}") from None
        return spec, generate(spec, cfg.n_samples, seed=seed)
    return None, load_csv(cfg.dataset)


def _write_jsonl(path: Path, records) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _run_seed(cfg: ExperimentConfig, seed: int, out_dir: Optional[str]) -> RunReport:
    report = RunReport(seed=seed)
    start = time.perf_counter()
    try:
        spec, data = load_dataset(cfg, seed)
        rc = replace(cfg.run, seed=seed)
        result = run(rc, data)
        report.front = front_records(result.front)
        report.stats = [s.as_dict() for s in result.stats]
        report.generations = result.generations
        if spec is not None:
            report.verdict = classify_recovery(result.front, spec).value
    except ConfigError:
        raise
    except Exception as exc:  # recorded, the other seeds still run
        report.error = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=5)}"
    report.wall_clock = time.perf_counter() - start
    if out_dir is not None:
        d = Path(out_dir)
        _write_jsonl(d / f"seed{seed}.front.jsonl", report.front)
        _write_jsonl(d / f"seed{seed}.stats.jsonl", report.stats)
        (d / f"seed{seed}.run.json").write_text(json.dumps(report.meta(), indent=2, sort_keys=True) + "\n")
    return report


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run every seed, then write the aggregate files."""
    cfg.validate()
    if cfg.dataset is not None and not Path(cfg.dataset).is_file():
        raise ConfigError(f"--dataset: no such file {cfg.dataset!r}")
    # surface dataset errors before spawning work
    try:
        load_dataset(cfg, cfg.first_seed)
    except DatasetError as exc:
        raise ConfigError(f"--dataset: {exc}") from None
    out_dir = None
    if write:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        out_dir = cfg.out_dir
    seeds = list(range(cfg.first_seed, cfg.first_seed + cfg.seeds))
    if cfg.threads > 1 and not cfg.deterministic and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.threads, len(seeds))) as pool:
            futures = [pool.submit(_run_seed, cfg, s, out_dir) for s in seeds]
            runs = [f.result() for f in futures]
    else:
        runs = [_run_seed(cfg, s, out_dir) for s in seeds]

    label = get_benchmark(cfg.benchmark).name.lower() if cfg.benchmark else Path(cfg.dataset).stem
    report = ExperimentReport(label=label, mode=cfg.run.mode.value,
                              benchmark=get_benchmark(cfg.benchmark).name if cfg.benchmark else None,
                              noise=cfg.noise, runs=runs)
    ok = [r for r in runs if r.error is None]
    if ok:
        report.stats = front_stats([r.front for r in ok], cfg.run.mode,
                                   generations=[r.generations for r in ok])
    if write:
        d = Path(cfg.out_dir)
        (d / "aggregate.json").write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
        (d / "summary.txt").write_text(format_summary([report]))
    return report


def format_summary(reports: List[ExperimentReport]) -> str:
    """Plain-text table; recovery cells read ``correct/almost/wrong``."""
    header = ("dataset", "noise", "mode", "c/a/w", "front", "viol%", "consts", "gens", "failed")
    rows = [header]
    for rep in reports:
        counts = rep.verdict_counts
        cell = "-" if counts is None else f"{counts['correct']}/{counts['almost']}/{counts['wrong']}"
        pooled = (rep.stats or {}).get("pooled", {})

        def med(key, fmt="{:.1f}"):
            v = pooled.get(key, {}).get("median")
            return "-" if v is None else fmt.format(v)

        rows.append((rep.label, f"{rep.noise:g}", rep.mode, cell, med("front_size"),
                     med("violating_pct"), med("mean_constants", "{:.2f}"),
                     med("generations", "{:.0f}"), str(rep.failures)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.append("")
    lines.append("almost = target shape after deleting at most 2 surplus constants")
    return "\n".join(lines) + "\n"


def read_run_dir(path) -> ExperimentReport:
    """Rebuild an ExperimentReport from a directory written by :func:`run_experiment`."""
    d = Path(path)
    agg = json.loads((d / "aggregate.json").read_text())
    runs = []
    for meta in agg["runs"]:
        seed = meta["seed"]
        front_file = d / f"seed{seed}.front.jsonl"
        stats_file = d / f"seed{seed}.stats.jsonl"
        front = [json.loads(l) for l in front_file.read_text().splitlines() if l.strip()] if front_file.exists() else []
        stats = [json.loads(l) for l in stats_file.read_text().splitlines() if l.strip()] if stats_file.exists() else []
        runs.append(RunReport(seed=seed, front=front, stats=stats, verdict=meta.get("verdict"),
                              wall_clock=meta.get("wall_clock", 0.0),
                              generations=meta.get("generations", 0), error=meta.get("error")))
    rep = ExperimentReport(label=agg["label"], mode=agg["mode"], benchmark=agg["benchmark"],
                           noise=agg["noise"], runs=runs)
    ok = [r for r in runs if r.error is None]
    if ok:
        rep.stats = front_stats([r.front for r in ok], rep.mode, [r.generations for r in ok])
    return rep
