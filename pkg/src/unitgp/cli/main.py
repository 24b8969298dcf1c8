"""``unitgp`` command line: run, generate-data, classify, stats."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from ..benchmarks import BENCHMARKS, generate, get_benchmark, save_csv
from ..evolution import ConfigError
from ..expr import parse
from .config import build_config
from .experiment import format_summary, read_run_dir, run_experiment
from .recovery import classify_recovery, self_test


def _add_run_parser(sub) -> None:
    p = sub.add_parser("run", help="evolve equations over several seeds and write reports")
    p.add_argument("--config", help="flat 'key = value' settings file")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--benchmark", choices=sorted(BENCHMARKS), type=str.lower)
    src.add_argument("--dataset", help="CSV file: names row, units row, numeric rows")
    # validated by the config layer so the error names the flag
    p.add_argument("--mode", help="baseline | culling | repair | multiobjective")
    p.add_argument("--noise", type=float)
    p.add_argument("--seeds", type=int, help="number of independent runs (default 5)")
    p.add_argument("--first-seed", type=int, dest="first_seed")
    p.add_argument("--budget", help="wall-clock seconds ('120s') or generations ('50g')")
    p.add_argument("--pop", type=int, help="population size")
    p.add_argument("--samples", type=int, dest="n_samples", help="benchmark sample count")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--threads", type=int, help="seeds evaluated in parallel worker processes")
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="run seeds one after another in this process")


def _cmd_run(args) -> int:
    flags = {k: getattr(args, k) for k in ("benchmark", "dataset", "mode", "noise", "seeds",
                                           "first_seed", "budget", "pop", "n_samples",
                                           "out_dir", "threads", "deterministic")}
    cfg = build_config(args.config, flags=flags)
    report = run_experiment(cfg)
    sys.stdout.write(format_summary([report]))
    print(f"reports written to {cfg.out_dir}")
    return 0


def _cmd_generate(args) -> int:
    spec = get_benchmark(args.benchmark, args.noise)
    data = generate(spec, args.samples, seed=args.seed)
    save_csv(data, args.out)
    print(f"wrote {data.n_samples} rows of {spec.name} to {args.out}")
    return 0


def _read_front(path: str) -> List[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        out.append(json.loads(line)["equation"] if line.startswith("{") else line)
    return out


def _cmd_classify(args) -> int:
    self_test()
    front = list(args.equations)
    for f in args.front or ():
        front.extend(_read_front(f))
    if not front:
        raise ConfigError("classify: give equations or --front files")
    trees = [parse(e) for e in front]
    print(classify_recovery(trees, args.benchmark).value)
    return 0


def _cmd_stats(args) -> int:
    reports = [read_run_dir(d) for d in args.dirs]
    sys.stdout.write(format_summary(reports))
    if args.json:
        for rep in reports:
            print(json.dumps({"label": rep.label, "front_stats": rep.stats}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unitgp",
                                     description="Unit-aware genetic programming for symbolic regression")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)

    g = sub.add_parser("generate-data", help="sample a benchmark into a CSV file")
    g.add_argument("--benchmark", required=True, choices=sorted(BENCHMARKS), type=str.lower)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--samples", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    c = sub.add_parser("classify", help="correct/almost/wrong verdict for a front")
    c.add_argument("--benchmark", required=True, choices=sorted(BENCHMARKS), type=str.lower)
    c.add_argument("--front", action="append", help="front JSON-lines file or one equation per line")
    c.add_argument("equations", nargs="*")

    s = sub.add_parser("stats", help="summarise run directories")
    s.add_argument("dirs", nargs="+")
    s.add_argument("--json", action="store_true", help="also print the front statistics as JSON")
    return parser


_COMMANDS = {"run": _cmd_run, "generate-data": _cmd_generate, "classify": _cmd_classify,
             "stats": _cmd_stats}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"unitgp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"unitgp {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
