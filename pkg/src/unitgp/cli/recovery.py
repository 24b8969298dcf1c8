"""Deterministic recovery classification of a front against a known law.

Equations are reduced to a canonical form in which

* constant-only subtrees fold into one constant ``C``;
* products, quotients, square roots and fixed powers become a monomial: a
  flag for a constant coefficient plus a sorted map ``base -> exponent``
  with exact rational exponents;
* sums become a flag for an additive constant plus a sorted tuple of signed
  terms; a term carrying a constant coefficient loses its sign (the constant
  absorbs it) and such terms merge when their bases agree.

A front is ``correct`` when one of its members canonicalises to the target
shape, ``almost`` when it does so after deleting at most two constant
coefficients/offsets, and ``wrong`` otherwise.

Canonical forms do not cancel common factors, so a numeric check backs them
up: a member whose free constants are no more than the target's counts as
the law when refitting on noise-free data reproduces it. Deleting a constant
pins it (offsets to 0 or a unit literal, coefficients to +1 or -1), which keeps the free count
down and stops surplus constants from fitting junk terms away.
"""

from __future__ import annotations

import enum
import functools
import itertools
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..benchmarks import BenchmarkSpec, generate, get_benchmark
from ..expr import Binary, Const, ExprTree, Node, Unary, Var, iter_nodes, parse
from ..fitting import fit_constants
from ..units import OpKind

__all__ = ["Verdict", "canonical", "constant_sites", "classify_tree", "classify_recovery",
           "target_shapes", "MAX_SURPLUS"]

MAX_SURPLUS = 2
# relative MSE below which a refit on noise-free data counts as the same law
EQUIVALENCE_TOL = 1e-16

C = ("C",)
ONE = ("1",)


class Verdict(str, enum.Enum):
    CORRECT = "correct"
    ALMOST = "almost"
    WRONG = "wrong"


_ORDER = {Verdict.CORRECT: 0, Verdict.ALMOST: 1, Verdict.WRONG: 2}


def _key(t) -> str:
    return repr(t)


def _as_product(t) -> Tuple[bool, Dict[tuple, Fraction]]:
    if t == C:
        return True, {}
    if t == ONE:
        return False, {}
    if t[0] == "prod":
        return t[1], dict(t[2])
    return False, {t: Fraction(1)}


def _orient(t):
    """Flip a sum so its first term is positive (only valid under a constant factor)."""
    if t[0] != "sum" or not t[2] or t[2][0][0] > 0:
        return t
    return _make_sum(t[1], [(-s, term) for s, term in t[2]])


def _make_product(coef: bool, factors: Iterable[Tuple[tuple, Fraction]]):
    merged: Dict[tuple, Fraction] = {}
    for base, e in factors:
        if base == C:
            coef = True
            continue
        if base == ONE:
            continue
        if base[0] == "prod":
            coef = coef or base[1]
            for b, e2 in base[2]:
                merged[b] = merged.get(b, Fraction(0)) + e2 * e
            continue
        merged[base] = merged.get(base, Fraction(0)) + e
    if coef:
        oriented: Dict[tuple, Fraction] = {}
        for b, e in merged.items():
            b = _orient(b) if e.denominator == 1 else b
            oriented[b] = oriented.get(b, Fraction(0)) + e
        merged = oriented
    merged = {b: e for b, e in merged.items() if e != 0}
    if not merged:
        return C if coef else ONE
    if not coef and len(merged) == 1:
        (base, e), = merged.items()
        if e == 1:
            return base
    return ("prod", coef, tuple(sorted(merged.items(), key=lambda be: (_key(be[0]), be[1]))))


def _make_sum(const: bool, terms: Iterable[Tuple[int, tuple]]):
    flat: List[Tuple[int, tuple]] = []
    for sign, term in terms:
        if term == C:
            const = True
        elif term[0] == "sum":
            const = const or term[1]
            flat.extend((sign * s, t) for s, t in term[2])
        else:
            flat.append((sign, term))
    out: List[Tuple[int, tuple]] = []
    seen_scaled = set()
    for sign, term in flat:
        if term[0] == "prod" and term[1]:
            # c1*t + c2*t is one scaled term
            if term in seen_scaled:
                continue
            seen_scaled.add(term)
            sign = 1
        out.append((sign, term))
    if not out:
        return C if const else ("sum", False, ())
    if not const and len(out) == 1 and out[0][0] == 1:
        return out[0][1]
    return ("sum", const, tuple(sorted(out, key=lambda st: (_key(st[1]), st[0]))))


def _power(t, e: Fraction):
    return _make_product(False, [(t, Fraction(e))])


def _func(name: str, *args):
    if all(a == C or a == ONE for a in args):
        return C
    return ("f", name) + tuple(args)


def canonical(tree) -> tuple:
    """Canonical form of an ExprTree or node (hashable nested tuples)."""
    node = tree.root if isinstance(tree, ExprTree) else tree
    return _canon(node)


def _canon(node: Node) -> tuple:
    if isinstance(node, Const):
        return C
    if isinstance(node, Var):
        return ("x", node.index)
    if isinstance(node, Unary):
        child = _canon(node.child)
        kind = node.op.kind
        if kind is OpKind.SQRT:
            return _power(child, Fraction(1, 2))
        if kind is OpKind.FIXED_POW:
            return _power(child, Fraction(node.op.k))
        return _func(kind.value, child)
    left, right = _canon(node.left), _canon(node.right)
    kind = node.op.kind
    if kind is OpKind.MUL:
        return _make_product(False, [(left, Fraction(1)), (right, Fraction(1))])
    if kind is OpKind.DIV:
        return _make_product(False, [(left, Fraction(1)), (right, Fraction(-1))])
    if kind is OpKind.ADD:
        return _make_sum(False, [(1, left), (1, right)])
    if kind is OpKind.SUB:
        return _make_sum(False, [(1, left), (-1, right)])
    return _func("^", left, right)


def constant_sites(t, path: Tuple[int, ...] = ()) -> List[Tuple[int, ...]]:
    """Paths of every constant coefficient or offset that could be deleted."""
    out = []
    if t[0] == "prod":
        if t[1]:
            out.append(path)
        for i, (b, _) in enumerate(t[2]):
            out.extend(constant_sites(b, path + (i,)))
    elif t[0] == "sum":
        if t[1]:
            out.append(path)
        for i, (_, term) in enumerate(t[2]):
            out.extend(constant_sites(term, path + (i,)))
    elif t[0] == "f":
        for i, arg in enumerate(t[2:]):
            out.extend(constant_sites(arg, path + (i,)))
    return out


def _rebuild(t, drop, path: Tuple[int, ...] = ()) -> List[tuple]:
    """Forms of ``t`` with the constants at ``drop`` removed.

    A scaled sum term lost its sign to its constant, so removing that
    constant yields both signs.
    """
    if t[0] == "prod":
        options = [_rebuild(b, drop, path + (i,)) for i, (b, _) in enumerate(t[2])]
        exps = [e for _, e in t[2]]
        coef = t[1] and path not in drop
        return _unique(_make_product(coef, zip(bases, exps)) for bases in itertools.product(*options))
    if t[0] == "sum":
        options = []
        for i, (sign, term) in enumerate(t[2]):
            signs = (1, -1) if term[0] == "prod" and term[1] and path + (i,) in drop else (sign,)
            options.append([(sg, form) for form in _rebuild(term, drop, path + (i,)) for sg in signs])
        const = t[1] and path not in drop
        return _unique(_make_sum(const, terms) for terms in itertools.product(*options))
    if t[0] == "f":
        options = [_rebuild(a, drop, path + (i,)) for i, a in enumerate(t[2:])]
        return _unique(_func(t[1], *args) for args in itertools.product(*options))
    return [t]


def _unique(forms) -> List[tuple]:
    return list(dict.fromkeys(forms))


def target_shapes(spec: BenchmarkSpec) -> List[tuple]:
    """Canonical target shapes of a benchmark (several when equivalent spellings differ)."""
    shapes = [canonical(parse(spec.shape))]
    if spec.name == "Rydberg":
        shapes.append(canonical(parse("c0 * pow2(x0) * pow2(x1) / (pow2(x1) - pow2(x0))")))
    return shapes


def _n_constants(t) -> int:
    return len(constant_sites(t)) + (1 if t == C else 0)


@functools.lru_cache(maxsize=None)
def _clean_data(name: str):
    return generate(get_benchmark(name), 200, seed=20240101)


def _numerically_equivalent(tree: ExprTree, spec: BenchmarkSpec, fixed=None) -> bool:
    clean = _clean_data(spec.name)
    fit = fit_constants(tree, clean, np.random.default_rng(0), fixed=fixed)
    var = float(np.var(clean.targets))
    return var > 0 and fit.mse / var < EQUIVALENCE_TOL


def _deletions(tree: ExprTree) -> Dict[int, Tuple[float, ...]]:
    """Pinned values that delete each constant slot, by the operator above it."""
    out: Dict[int, Tuple[float, ...]] = {}
    for node, _ in iter_nodes(tree.root):
        if not isinstance(node, Binary):
            continue
        for child in (node.left, node.right):
            if not isinstance(child, Const):
                continue
            if node.op.kind in (OpKind.ADD, OpKind.SUB):
                # the grammar has no literal 1, so an offset may stand in for one
                out[child.slot] = (0.0, 1.0, -1.0)
            elif node.op.kind in (OpKind.MUL, OpKind.DIV):
                out[child.slot] = (1.0, -1.0)
    return out


def _numerically_almost(tree: ExprTree, spec: BenchmarkSpec, n_target: int) -> bool:
    need = tree.n_constants - n_target
    if need > MAX_SURPLUS:
        return False
    options = _deletions(tree)
    for k in range(max(need, 1), MAX_SURPLUS + 1):
        for slots in itertools.combinations(sorted(options), k):
            for values in itertools.product(*(options[s] for s in slots)):
                if _numerically_equivalent(tree, spec, dict(zip(slots, values))):
                    return True
    return False


def classify_tree(tree: ExprTree, spec: BenchmarkSpec,
                  targets: Optional[Sequence[tuple]] = None) -> Verdict:
    targets = list(targets) if targets is not None else target_shapes(spec)
    form = canonical(tree)
    if form in targets:
        return Verdict.CORRECT
    n_target = min(_n_constants(t) for t in targets)
    if _n_constants(form) <= n_target and _numerically_equivalent(tree, spec):
        return Verdict.CORRECT
    sites = constant_sites(form)
    for k in range(1, MAX_SURPLUS + 1):
        for drop in itertools.combinations(sites, k):
            if any(f in targets for f in _rebuild(form, set(drop))):
                return Verdict.ALMOST
    if _numerically_almost(tree, spec, n_target):
        return Verdict.ALMOST
    return Verdict.WRONG


def classify_recovery(front, benchmark) -> Verdict:
    """Best verdict over the front members (trees or objects with a ``tree`` attribute)."""
    spec = benchmark if isinstance(benchmark, BenchmarkSpec) else get_benchmark(benchmark)
    targets = target_shapes(spec)
    best = Verdict.WRONG
    for member in front:
        tree = getattr(member, "tree", member)
        if isinstance(tree, str):
            tree = parse(tree)
        v = classify_tree(tree, spec, targets)
        if _ORDER[v] < _ORDER[best]:
            best = v
            if best is Verdict.CORRECT:
                break
    return best


def self_test() -> None:
    """Every benchmark's own ground-truth shape must classify as correct."""
    from ..benchmarks import BENCHMARKS
    for spec in BENCHMARKS.values():
        verdict = classify_recovery([parse(spec.shape)], spec)
        if verdict is not Verdict.CORRECT:
            raise AssertionError(f"classifier self-test failed for {spec.name}: {verdict.value}")
