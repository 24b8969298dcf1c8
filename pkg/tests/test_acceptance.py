"""Acceptance checks, one printed pass/fail line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``. The rediscovery runs take about three
hours on one core; ``UNITGP_ACCEPTANCE_BUDGET`` (seconds per run) shortens
them for a quick look, and the printed line names the budget used.
"""

import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from oracles import brute_force_fronts, naive_analyze  # noqa: E402
from unitgp.benchmarks import BENCHMARKS, apply_noise, generate  # noqa: E402
from unitgp.cli.config import ExperimentConfig  # noqa: E402
from unitgp.cli.experiment import run_experiment  # noqa: E402
from unitgp.dim_analysis import analyze, repair  # noqa: E402
from unitgp.evolution import RunConfig, nondominated_sort  # noqa: E402
from unitgp.expr import TreeConfig, depth, evaluate, random_tree  # noqa: E402
from unitgp.units import DIMENSIONLESS, JOKER, Op, OpKind, UnitVector, propagate_binary, propagate_unary  # noqa: E402

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

ALL_OPS = tuple(Op.from_symbol(s) for s in
                ("+", "-", "*", "/", "exp", "log", "sin", "cos", "tan", "sqrt", "pow2", "pow3", "^"))
BUDGET = float(os.environ.get("UNITGP_ACCEPTANCE_BUDGET", "120"))
POPULATION = 200
SEEDS = 5
MODES = ("baseline", "culling", "multiobjective")
# (benchmark, noise, verdicts that count, required count out of SEEDS)
CELLS = [
    ("hubble", 0.0, ("correct",), 3),
    ("hubble", 0.1, ("correct", "almost"), 3),
    ("kepler", 0.0, ("correct",), 3),
    ("kepler", 0.1, ("correct", "almost"), 3),
    ("rydberg", 0.0, ("correct", "almost"), 2),
    ("idealgas", 0.0, ("correct", "almost"), 2),
]


def record(number, name, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {name}  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def signatures():
    return [(key, spec.units, spec.target_unit_vector) for key, spec in BENCHMARKS.items()]


def random_trees(n_features, seed, count):
    cfg = TreeConfig(n_features=n_features, function_set=ALL_OPS, init_depth=(1, 6), max_complexity=10_000)
    gen = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        t = random_tree(cfg, gen)
        if depth(t.root) <= 6:
            out.append(t.with_constants(gen.uniform(0.5, 2.0, size=t.n_constants)))
    return out


# -- 1: propagation table --------------------------------------------------------------

def table_rows():
    """(label, computed, expected) for every propagation rule, written out by hand."""
    F = Fraction
    u = UnitVector.known(1, 1, -2)
    v = UnitVector.known(0, 0, 1)
    other = UnitVector.known(1)
    g = np.random.default_rng(0)
    rows = []
    for sym in "+-":
        op = Op.from_symbol(sym)
        rows += [
            (f"u {sym} u", propagate_binary(op, u, u, g), (u, False)),
            (f"u {sym} *", propagate_binary(op, u, JOKER, g), (u, False)),
            (f"* {sym} u", propagate_binary(op, JOKER, u, g), (u, False)),
            (f"* {sym} *", propagate_binary(op, JOKER, JOKER, g), (JOKER, False)),
        ]
        unit, bad = propagate_binary(op, u, other, g)
        rows.append((f"u {sym} v", (unit in (u, other), bad), (True, True)))
    mul, div = Op.from_symbol("*"), Op.from_symbol("/")
    rows += [
        ("u * v", propagate_binary(mul, u, v, g), (UnitVector.known(1, 1, -1), False)),
        ("u * *", propagate_binary(mul, u, JOKER, g), (JOKER, False)),
        ("* * u", propagate_binary(mul, JOKER, u, g), (JOKER, False)),
        ("* * *", propagate_binary(mul, JOKER, JOKER, g), (JOKER, False)),
        ("u / v", propagate_binary(div, u, v, g), (UnitVector.known(1, 1, -3), False)),
        ("u / *", propagate_binary(div, u, JOKER, g), (JOKER, False)),
        ("* / u", propagate_binary(div, JOKER, u, g), (JOKER, False)),
        ("* / *", propagate_binary(div, JOKER, JOKER, g), (JOKER, False)),
    ]
    for name in ("exp", "log", "sin", "cos", "tan"):
        op = Op.from_symbol(name)
        rows += [
            (f"{name}(1)", propagate_unary(op, DIMENSIONLESS), (DIMENSIONLESS, False)),
            (f"{name}(*)", propagate_unary(op, JOKER), (DIMENSIONLESS, False)),
            (f"{name}(u)", propagate_unary(op, u), (DIMENSIONLESS, True)),
        ]
    sqrt = Op.from_symbol("sqrt")
    rows += [
        ("sqrt(u)", propagate_unary(sqrt, u), (UnitVector.known(F(1, 2), F(1, 2), -1), False)),
        ("sqrt(*)", propagate_unary(sqrt, JOKER), (JOKER, False)),
    ]
    for k in (2, 3):
        op = Op(OpKind.FIXED_POW, k)
        rows += [
            (f"pow{k}(u)", propagate_unary(op, u), (UnitVector.known(k, k, -2 * k), False)),
            (f"pow{k}(*)", propagate_unary(op, JOKER), (JOKER, False)),
        ]
    pw = Op.from_symbol("^")
    rows += [
        ("1 ^ 1", propagate_binary(pw, DIMENSIONLESS, DIMENSIONLESS, g), (DIMENSIONLESS, False)),
        ("* ^ 1", propagate_binary(pw, JOKER, DIMENSIONLESS, g), (DIMENSIONLESS, False)),
        ("1 ^ *", propagate_binary(pw, DIMENSIONLESS, JOKER, g), (DIMENSIONLESS, False)),
        ("* ^ *", propagate_binary(pw, JOKER, JOKER, g), (DIMENSIONLESS, False)),
        ("u ^ 1", propagate_binary(pw, u, DIMENSIONLESS, g), (DIMENSIONLESS, True)),
        ("1 ^ u", propagate_binary(pw, DIMENSIONLESS, u, g), (DIMENSIONLESS, True)),
    ]
    return rows


def check_table():
    start = time.perf_counter()
    rows = table_rows()
    bad = [label for label, got, want in rows if got != want]
    elapsed = time.perf_counter() - start
    detail = f"{len(rows) - len(bad)}/{len(rows)} rule cases exact, {elapsed:.3f}s"
    if bad:
        detail += ", wrong: " + ", ".join(bad)
    return record(1, "unit propagation table", not bad and elapsed < 1.0, detail)


# -- 2: analysis vs naive oracle -------------------------------------------------------

def check_oracle():
    start = time.perf_counter()
    mismatches, total = 0, 0
    for key, units, target in signatures():
        for i, t in enumerate(random_trees(len(units), 1000 + len(key), 1000)):
            r = analyze(t, units, target, np.random.default_rng(i))
            u, internal, violations = naive_analyze(t.root, [x.exponents for x in units],
                                                    target.exponents, np.random.default_rng(i))
            total += 1
            if r.output_unit.exponents != u or (r.internal, r.violations) != (internal, violations):
                mismatches += 1
    elapsed = time.perf_counter() - start
    return record(2, "analysis matches naive oracle", mismatches == 0 and elapsed < 10.0,
                  f"{total - mismatches}/{total} trees agree, {elapsed:.1f}s")


# -- 3: repair soundness ---------------------------------------------------------------

def check_repair():
    start = time.perf_counter()
    unsound, changed, total = 0, 0, 0
    for key, units, target in signatures():
        data = generate(BENCHMARKS[key], 50, seed=7)
        for i, t in enumerate(random_trees(len(units), 2000 + len(key), 1000)):
            out = repair(t, units, target, np.random.default_rng(i), max_complexity=None)
            total += 1
            if analyze(out, units, target, np.random.default_rng(i)).violations != 0:
                unsound += 1
            a, b = evaluate(t, data), evaluate(out, data)
            both = np.isfinite(a) & np.isfinite(b)
            if (not np.array_equal(np.isfinite(a), np.isfinite(b))
                    or not np.allclose(b[both], a[both], rtol=1e-12, atol=0.0)):
                changed += 1
    elapsed = time.perf_counter() - start
    ok = unsound == 0 and changed == 0 and elapsed < 30.0
    return record(3, "repair is sound and keeps values", ok,
                  f"{total} trees, {unsound} with violations left, {changed} with changed values "
                  f"on 50 rows, {elapsed:.1f}s")


# -- 4 and 5: rediscovery runs ---------------------------------------------------------

def rediscovery_runs(out_root):
    """Run every cell in every mode, plus one repair run per cell."""
    reports = {}
    start = time.perf_counter()
    for bench, noise, _, _ in CELLS:
        for mode in MODES + ("repair",):
            seeds = SEEDS if mode != "repair" else 1
            cfg = ExperimentConfig(
                benchmark=bench, noise=noise, seeds=seeds, deterministic=True,
                out_dir=str(Path(out_root) / f"{bench}-{noise}-{mode}"),
                run=RunConfig(mode=mode, population_size=POPULATION, time_budget=BUDGET))
            reports[(bench, noise, mode)] = run_experiment(cfg, write=True)
            rep = reports[(bench, noise, mode)]
            print(f"  {bench} noise={noise} {mode}: {rep.verdict_counts} failed={rep.failures}", flush=True)
    return reports, time.perf_counter() - start


def check_rediscovery(reports, elapsed):
    ok_all, parts = True, []
    for bench, noise, accepted, need in CELLS:
        for mode in MODES:
            rep = reports[(bench, noise, mode)]
            hits = sum(1 for r in rep.runs if r.verdict in accepted)
            ok = hits >= need and rep.failures == 0
            ok_all &= ok
            parts.append(f"{bench}@{noise:g}/{mode}={hits}/{SEEDS}{'' if ok else '!'}")
    return record(4, "desk-scale rediscovery", ok_all,
                  f"pop {POPULATION}, {BUDGET:g}s per run; " + " ".join(parts))


def check_runtime(elapsed):
    return record("4.1", "rediscovery wall-clock within about an hour", elapsed <= 3600 * 1.1,
                  f"{elapsed / 60:.1f} min for all runs on {os.cpu_count()} CPU(s)")


def check_valid_fronts(reports):
    members, bad = 0, 0
    for (bench, noise, mode), rep in reports.items():
        if mode not in ("culling", "repair"):
            continue
        for run in rep.runs:
            for m in run.front:
                members += 1
                bad += m["violations"] != 0
    return record(5, "culling and repair fronts are violation-free", members > 0 and bad == 0,
                  f"{bad} of {members} front members violate")


# -- 6: non-dominated sorting ----------------------------------------------------------

def check_sorting():
    start = time.perf_counter()
    g = np.random.default_rng(11)
    wrong, total = 0, 0
    for n_obj in (3, 4):
        for k in range(200):
            # every other population on a coarse grid so ties are common
            pts = g.random((50, n_obj)) if k % 2 else g.integers(0, 4, size=(50, n_obj)).astype(float)
            got = [sorted(f) for f in nondominated_sort(pts)]
            want = [sorted(f) for f in brute_force_fronts([tuple(p) for p in pts])]
            total += 1
            wrong += got != want
    elapsed = time.perf_counter() - start
    return record(6, "non-dominated sort matches brute force", wrong == 0 and elapsed < 10.0,
                  f"{total - wrong}/{total} populations, {elapsed:.2f}s")


# -- 7: noise level --------------------------------------------------------------------

def check_noise():
    start = time.perf_counter()
    y = np.random.default_rng(3).lognormal(0.0, 1.0, size=10_000)
    resid = apply_noise(y, 0.05, seed=4) - y
    ratio = np.std(resid, ddof=1) / (0.05 * np.std(y, ddof=1))
    elapsed = time.perf_counter() - start
    return record(7, "noise has the requested spread", abs(ratio - 1) <= 0.10 and elapsed < 1.0,
                  f"residual std / requested = {ratio:.4f}, {elapsed:.3f}s")


# -- 8: determinism --------------------------------------------------------------------

def check_determinism(out_root):
    exports = []
    for name in ("first", "second"):
        cfg = ExperimentConfig(
            benchmark="newton", seeds=1, first_seed=3, deterministic=True,
            out_dir=str(Path(out_root) / name),
            run=RunConfig(mode="multiobjective", population_size=100, time_budget=None,
                          generation_budget=15))
        run_experiment(cfg, write=True)
        exports.append((Path(cfg.out_dir) / "seed3.front.jsonl").read_bytes())
    same = exports[0] == exports[1]
    return record(8, "single-threaded runs export identical fronts", same and len(exports[0]) > 0,
                  f"{len(exports[0])} bytes, {'identical' if same else 'different'}; 15-generation budget")


# -- pytest entry points ---------------------------------------------------------------

@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return rediscovery_runs(tmp_path_factory.mktemp("rediscovery"))


class TestAcceptance:
    def test_1_table(self):
        assert check_table()

    def test_2_oracle(self):
        assert check_oracle()

    def test_3_repair(self):
        assert check_repair()

    def test_4_rediscovery(self, runs):
        assert check_rediscovery(*runs)

    def test_4_1_runtime(self, runs):
        assert check_runtime(runs[1])

    def test_5_valid_fronts(self, runs):
        assert check_valid_fronts(runs[0])

    def test_6_sorting(self):
        assert check_sorting()

    def test_7_noise(self):
        assert check_noise()

    def test_8_determinism(self, tmp_path):
        assert check_determinism(tmp_path)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        check_table()
        check_oracle()
        check_repair()
        check_sorting()
        check_noise()
        check_determinism(tmp)
        reports, elapsed = rediscovery_runs(tmp)
        check_rediscovery(reports, elapsed)
        check_runtime(elapsed)
        check_valid_fronts(reports)
    print("\n".join(["", "summary:"] + sorted(ACCEPTANCE_LINES, key=lambda s: float(s.split()[1].rstrip(":")))))


if __name__ == "__main__":
    main()
