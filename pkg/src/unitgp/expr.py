"""Expression trees: representation, evaluation, complexity, text format and variation.

Trees are immutable. Constant leaves refer to a slot in the tree's constant
vector; slots are numbered 0..n-1 in pre-order, which every constructor in
this module re-establishes through :func:`make_tree`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .units import Op, OpKind

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Node",
    "ExprTree",
    "TreeConfig",
    "make_tree",
    "evaluate",
    "compile_node",
    "complexity",
    "render",
    "structure_key",
    "parse",
    "iter_nodes",
    "replace_at",
    "random_tree",
    "grow",
    "subtree_crossover",
    "subtree_mutation",
    "point_mutation",
    "constant_perturbation",
    "mutate",
    "EMPIRICAL_FUNCTIONS",
]


@dataclass(frozen=True)
class Const:
    slot: int


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Unary:
    op: Op
    child: "Node"


@dataclass(frozen=True)
class Binary:
    op: Op
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]


@dataclass(frozen=True)
class ExprTree:
    root: Node
    constants: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        n = sum(1 for node, _ in iter_nodes(self.root) if isinstance(node, Const))
        if n != len(self.constants):
            raise ValueError(f"tree has {n} constant slots but {len(self.constants)} values")

    @property
    def n_constants(self) -> int:
        return len(self.constants)

    def with_constants(self, values: Sequence[float]) -> "ExprTree":
        return ExprTree(self.root, tuple(values))

    def __str__(self) -> str:
        return render(self)


EMPIRICAL_FUNCTIONS: Tuple[Op, ...] = (
    Op(OpKind.ADD), Op(OpKind.SUB), Op(OpKind.MUL), Op(OpKind.DIV),
    Op(OpKind.EXP), Op(OpKind.LOG), Op(OpKind.SQRT),
    Op(OpKind.FIXED_POW, 2), Op(OpKind.FIXED_POW, 3),
)


@dataclass(frozen=True)
class TreeConfig:
    """Settings shared by tree initialisation and the variation operators."""

    n_features: int
    function_set: Tuple[Op, ...] = EMPIRICAL_FUNCTIONS
    max_complexity: int = 30
    init_depth: Tuple[int, int] = (2, 5)
    p_constant: float = 0.3
    max_retries: int = 20
    mutation_depth: Tuple[int, int] = (0, 3)
    perturb_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "function_set", tuple(self.function_set))
        if self.n_features < 1:
            raise ValueError("need at least one feature")
        if not self.function_set:
            raise ValueError("function set is empty")


# -- traversal -----------------------------------------------------------------

Path = Tuple[int, ...]


def _children(node: Node) -> Tuple[Node, ...]:
    if isinstance(node, Unary):
        return (node.child,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    return ()


def iter_nodes(node: Node, path: Path = ()) -> Iterator[Tuple[Node, Path]]:
    """Pre-order walk yielding ``(node, path)``; a path lists child positions."""
    yield node, path
    for i, child in enumerate(_children(node)):
        yield from iter_nodes(child, path + (i,))


def get_at(node: Node, path: Path) -> Node:
    for i in path:
        node = _children(node)[i]
    return node


def replace_at(node: Node, path: Path, new: Node) -> Node:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(node, Unary):
        return Unary(node.op, replace_at(node.child, rest, new))
    if isinstance(node, Binary):
        if i == 0:
            return Binary(node.op, replace_at(node.left, rest, new), node.right)
        return Binary(node.op, node.left, replace_at(node.right, rest, new))
    raise IndexError("path runs past a leaf")


def make_tree(root: Node, values: Sequence[float] = ()) -> ExprTree:
    """Renumber constant slots in pre-order and attach their values.

    ``values`` is indexed by the *old* slot numbers found in ``root``; slots
    without a value (negative or out of range) get 1.0.
    """
    new_values: List[float] = []

    def walk(node: Node) -> Node:
        if isinstance(node, Const):
            old = node.slot
            new_values.append(float(values[old]) if 0 <= old < len(values) else 1.0)
            return Const(len(new_values) - 1)
        if isinstance(node, Var):
            return node
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.child))
        left = walk(node.left)
        return Binary(node.op, left, walk(node.right))

    root = walk(root)
    return ExprTree(root, tuple(new_values))


def depth(node: Node) -> int:
    kids = _children(node)
    return 0 if not kids else 1 + max(depth(k) for k in kids)


# -- evaluation ----------------------------------------------------------------

_NUMPY_FUNCS = {
    OpKind.EXP: "exp", OpKind.LOG: "log", OpKind.SIN: "sin", OpKind.COS: "cos",
    OpKind.TAN: "tan", OpKind.SQRT: "sqrt",
}


def _source(node: Node) -> str:
    if isinstance(node, Var):
        return f"X[{node.index}]"
    if isinstance(node, Const):
        return f"c[{node.slot}]"
    if isinstance(node, Unary):
        inner = _source(node.child)
        if node.op.kind is OpKind.FIXED_POW:
            return f"({inner} ** {node.op.k})"
        return f"np.{_NUMPY_FUNCS[node.op.kind]}({inner})"
    left, right = _source(node.left), _source(node.right)
    if node.op.kind is OpKind.BINARY_POW:
        return f"np.power({left}, {right})"
    return f"({left} {node.op.symbol} {right})"


_COMPILED: Dict[Node, Callable] = {}


def compile_node(node: Node) -> Callable:
    """Compile ``node`` into ``f(X, c)``; ``X[i]`` is feature column i, ``c`` a float array.

    The result may be a scalar when the tree holds no variable.
    """
    fn = _COMPILED.get(node)
    if fn is None:
        if len(_COMPILED) > 100_000:
            _COMPILED.clear()
        fn = eval(f"lambda X, c: {_source(node)}", {"np": np})
        _COMPILED[node] = fn
    return fn


def _columns(data) -> np.ndarray:
    X = getattr(data, "rows", data)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return X.T


def evaluate(tree: ExprTree, data, constants: Optional[Sequence[float]] = None) -> np.ndarray:
    """Evaluate over every sample of ``data`` (a Dataset or an n_samples x n_features array).

    Non-finite intermediate values propagate as nan/inf; no protection is applied.
    """
    cols = _columns(data)
    consts = np.asarray(tree.constants if constants is None else constants, dtype=float)
    with np.errstate(all="ignore"):
        out = compile_node(tree.root)(cols, consts)
    return np.broadcast_to(np.asarray(out, dtype=float), (cols.shape[1],)).copy()


# -- complexity and text format --------------------------------------------------

def complexity(tree_or_node) -> int:
    """Constants weigh 2, variables and operations 1."""
    node = tree_or_node.root if isinstance(tree_or_node, ExprTree) else tree_or_node
    if isinstance(node, Const):
        return 2
    if isinstance(node, Var):
        return 1
    return 1 + sum(complexity(k) for k in _children(node))


def _render(node: Node, constants, with_values: bool) -> str:
    if isinstance(node, Const):
        if with_values and constants is not None:
            return f"c{node.slot}[{constants[node.slot]!r}]"
        return f"c{node.slot}"
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        return f"{node.op.symbol}({_render(node.child, constants, with_values)})"
    return (f"({_render(node.left, constants, with_values)} {node.op.symbol} "
            f"{_render(node.right, constants, with_values)})")


def render(tree: ExprTree, with_values: bool = True) -> str:
    """Fully parenthesised infix, e.g. ``"(c0[3.5] * x0)"``."""
    return _render(tree.root, tree.constants, with_values)


def structure_key(tree_or_node) -> str:
    """Rendering without constant values; equal for structurally identical trees."""
    node = tree_or_node.root if isinstance(tree_or_node, ExprTree) else tree_or_node
    return _render(node, None, False)


_TOKENS = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf\b|nan\b)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<sym>[-+*/^()\[\],]))")

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


class _Parser:
    def __init__(self, text: str):
        self.tokens = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKENS.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"cannot parse {text!r} at offset {pos}")
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind)))
            pos = m.end()
            while pos < len(text) and text[pos].isspace():
                pos += 1
        self.i = 0
        self.values: List[float] = []

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, expected: Optional[str] = None):
        tok = self.peek()
        if tok[0] is None or (expected is not None and tok[1] != expected):
            raise ValueError(f"expected {expected or 'token'}, found {tok[1]!r}")
        self.i += 1
        return tok

    def new_const(self, value: float) -> Const:
        self.values.append(value)
        return Const(len(self.values) - 1)

    def expression(self, min_prec: int = 1) -> Node:
        left = self.atom()
        while True:
            kind, sym = self.peek()
            if kind != "sym" or sym not in _PRECEDENCE or _PRECEDENCE[sym] < min_prec:
                return left
            self.take()
            prec = _PRECEDENCE[sym]
            right = self.expression(prec if sym == "^" else prec + 1)
            left = Binary(Op.from_symbol(sym), left, right)

    def atom(self) -> Node:
        kind, tok = self.take()
        if kind == "num":
            return self.new_const(float(tok))
        if kind == "sym" and tok == "(":
            node = self.expression()
            self.take(")")
            return node
        if kind != "name":
            raise ValueError(f"unexpected token {tok!r}")
        m = re.fullmatch(r"x(\d+)", tok)
        if m:
            return Var(int(m.group(1)))
        m = re.fullmatch(r"c(\d+)", tok)
        if m:
            value = 1.0
            if self.peek() == ("sym", "["):
                self.take("[")
                sign = 1.0
                if self.peek() == ("sym", "-"):
                    self.take()
                    sign = -1.0
                value = sign * float(self.take()[1])
                self.take("]")
            return self.new_const(value)
        op = Op.from_symbol(tok)
        if op.arity != 1:
            raise ValueError(f"{tok!r} is not a function")
        self.take("(")
        child = self.expression()
        self.take(")")
        return Unary(op, child)


def parse(text: str) -> ExprTree:
    """Parse the :func:`render` format (looser infix with precedence is accepted too).

    Constants are renumbered in pre-order; ``c3`` without a value gets 1.0 and
    a bare numeric literal becomes a constant holding that value.
    """
    p = _Parser(text)
    root = p.expression()
    if p.peek()[0] is not None:
        raise ValueError(f"trailing input in {text!r}: {p.peek()[1]!r}")
    return make_tree(root, p.values)


# -- random construction and variation -------------------------------------------

def _terminal(config: TreeConfig, rng: np.random.Generator) -> Node:
    if rng.random() < config.p_constant:
        return Const(-1)
    return Var(int(rng.integers(config.n_features)))


def _pick_op(config: TreeConfig, rng: np.random.Generator) -> Op:
    return config.function_set[int(rng.integers(len(config.function_set)))]


def grow(config: TreeConfig, rng: np.random.Generator, max_depth: int, full: bool = False) -> Node:
    """Random subtree; ``full`` forces operations down to ``max_depth``."""
    if max_depth <= 0:
        return _terminal(config, rng)
    if not full:
        n_terms = config.n_features + 1
        if rng.random() < n_terms / (n_terms + len(config.function_set)):
            return _terminal(config, rng)
    op = _pick_op(config, rng)
    if op.arity == 1:
        return Unary(op, grow(config, rng, max_depth - 1, full))
    left = grow(config, rng, max_depth - 1, full)
    return Binary(op, left, grow(config, rng, max_depth - 1, full))


def random_tree(config: TreeConfig, rng: np.random.Generator) -> ExprTree:
    """Ramped half-and-half tree within ``config.max_complexity``.

    Depth is drawn from ``config.init_depth``; oversized draws are retried and
    the depth shrinks once the retry budget is spent.
    """
    lo, hi = config.init_depth
    d = int(rng.integers(lo, hi + 1))
    while True:
        for _ in range(config.max_retries):
            root = grow(config, rng, d, full=bool(rng.random() < 0.5))
            if complexity(root) <= config.max_complexity:
                return make_tree(root)
        if d == 0:
            # a single terminal always fits unless the cap is below 2
            return make_tree(Var(int(rng.integers(config.n_features))))
        d -= 1


def _random_path(root: Node, rng: np.random.Generator) -> Path:
    paths = [p for _, p in iter_nodes(root)]
    return paths[int(rng.integers(len(paths)))]


def _remap_slots(node: Node, offset: int) -> Node:
    """Shift constant slots so values can be looked up in a concatenated vector."""
    if isinstance(node, Const):
        return Const(node.slot + offset)
    if isinstance(node, Var):
        return node
    if isinstance(node, Unary):
        return Unary(node.op, _remap_slots(node.child, offset))
    return Binary(node.op, _remap_slots(node.left, offset), _remap_slots(node.right, offset))


def subtree_crossover(a: ExprTree, b: ExprTree, rng: np.random.Generator,
                      config: Optional[TreeConfig] = None) -> Tuple[ExprTree, ExprTree]:
    """Swap one random subtree of ``a`` with one of ``b``.

    Pairs exceeding the complexity cap are redrawn; when the retry budget runs
    out, fresh random trees are returned instead.
    """
    max_c = config.max_complexity if config else math.inf
    retries = config.max_retries if config else 1
    values = a.constants + b.constants
    ra, rb = a.root, _remap_slots(b.root, a.n_constants)
    for _ in range(retries):
        pa, pb = _random_path(ra, rng), _random_path(rb, rng)
        sa, sb = get_at(ra, pa), get_at(rb, pb)
        ca, cb = replace_at(ra, pa, sb), replace_at(rb, pb, sa)
        if complexity(ca) <= max_c and complexity(cb) <= max_c:
            return make_tree(ca, values), make_tree(cb, values)
    return random_tree(config, rng), random_tree(config, rng)


def subtree_mutation(tree: ExprTree, config: TreeConfig, rng: np.random.Generator) -> ExprTree:
    """Replace a random subtree with a freshly grown one."""
    lo, hi = config.mutation_depth
    for _ in range(config.max_retries):
        path = _random_path(tree.root, rng)
        new = grow(config, rng, int(rng.integers(lo, hi + 1)))
        root = replace_at(tree.root, path, new)
        if complexity(root) <= config.max_complexity:
            return make_tree(root, tree.constants)
    return random_tree(config, rng)


def point_mutation(tree: ExprTree, config: TreeConfig, rng: np.random.Generator) -> ExprTree:
    """Swap one operation for another of the same arity, or one leaf for another."""
    for _ in range(config.max_retries):
        path = _random_path(tree.root, rng)
        node = get_at(tree.root, path)
        if isinstance(node, (Const, Var)):
            new = _terminal(config, rng)
        else:
            same = [op for op in config.function_set if op.arity == node.op.arity and op != node.op]
            if not same:
                continue
            op = same[int(rng.integers(len(same)))]
            new = Unary(op, node.child) if isinstance(node, Unary) else Binary(op, node.left, node.right)
        root = replace_at(tree.root, path, new)
        if complexity(root) <= config.max_complexity:
            return make_tree(root, tree.constants)
    return random_tree(config, rng)


def constant_perturbation(tree: ExprTree, config: TreeConfig, rng: np.random.Generator) -> ExprTree:
    """Multiply every constant by ``1 + N(0, perturb_scale)``."""
    if not tree.constants:
        return tree
    noise = rng.normal(0.0, config.perturb_scale, size=tree.n_constants)
    return tree.with_constants(np.asarray(tree.constants) * (1.0 + noise))


def mutate(tree: ExprTree, config: TreeConfig, rng: np.random.Generator,
           weights: Tuple[float, float, float] = (0.2, 0.2, 0.1)) -> ExprTree:
    """Apply one mutation drawn with the given (subtree, point, constant) weights."""
    w = np.asarray(weights, dtype=float)
    choice = int(rng.choice(3, p=w / w.sum()))
    if choice == 0:
        return subtree_mutation(tree, config, rng)
    if choice == 1:
        return point_mutation(tree, config, rng)
    return constant_perturbation(tree, config, rng)
