"""Recursive dimensional analysis with violation counting, and the repair transformer."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .expr import Binary, Const, ExprTree, Node, Unary, Var, complexity, make_tree
from .units import (
    JOKER,
    Op,
    OpKind,
    UnitVector,
    manhattan_distance,
    propagate_binary,
    propagate_unary,
)

__all__ = ["DimReport", "RepairFailed", "analyze", "repair"]


@dataclass(frozen=True)
class DimReport:
    """Output unit of a tree and its violation total.

    ``violations`` is the internal count plus the Manhattan distance between
    the output unit and the target; ``internal`` keeps the integer part alone.
    """

    output_unit: UnitVector
    violations: Fraction
    internal: int = 0

    @property
    def valid(self) -> bool:
        return self.violations == 0


class RepairFailed(ValueError):
    """The repaired tree would exceed the complexity cap."""


def _walk(node: Node, var_units: Sequence[UnitVector], rng) -> Tuple[UnitVector, int]:
    if isinstance(node, Const):
        return JOKER, 0
    if isinstance(node, Var):
        return var_units[node.index], 0
    if isinstance(node, Unary):
        unit, v = _walk(node.child, var_units, rng)
        out, bad = propagate_unary(node.op, unit)
        return out, v + bad
    # right operand first, as in the reference traversal; this fixes the rng order
    d_right, v_right = _walk(node.right, var_units, rng)
    d_left, v_left = _walk(node.left, var_units, rng)
    out, bad = propagate_binary(node.op, d_left, d_right, rng)
    return out, v_left + v_right + bad


def analyze(tree, var_units: Sequence[UnitVector], target_unit: UnitVector,
            rng: Optional[np.random.Generator] = None) -> DimReport:
    """Output unit and violation total of ``tree`` (an ExprTree or a bare node).

    ``rng`` drives the random operand pick when two different known units are
    added; without one a fixed-seed generator is used.
    """
    root = tree.root if isinstance(tree, ExprTree) else tree
    if rng is None:
        rng = np.random.default_rng(0)
    unit, internal = _walk(root, var_units, rng)
    total = Fraction(internal) + manhattan_distance(unit, target_unit)
    return DimReport(unit, total, internal)


def _wrap(node: Node) -> Node:
    return Binary(Op(OpKind.MUL), Const(-1), node)


def _repair(node: Node, var_units, rng) -> Tuple[Node, UnitVector]:
    if isinstance(node, Const):
        return node, JOKER
    if isinstance(node, Var):
        return node, var_units[node.index]
    if isinstance(node, Unary):
        child, unit = _repair(node.child, var_units, rng)
        out, bad = propagate_unary(node.op, unit)
        if bad:
            child = _wrap(child)
            out, _ = propagate_unary(node.op, JOKER)
        return Unary(node.op, child), out
    right, d_right = _repair(node.right, var_units, rng)
    left, d_left = _repair(node.left, var_units, rng)
    kind = node.op.kind
    if kind in (OpKind.ADD, OpKind.SUB):
        if not d_left.is_joker and not d_right.is_joker and d_left != d_right:
            if rng.integers(2) == 0:
                left, d_left = _wrap(left), JOKER
            else:
                right, d_right = _wrap(right), JOKER
    elif kind is OpKind.BINARY_POW:
        if not (d_left.is_joker or d_left.is_dimensionless):
            left, d_left = _wrap(left), JOKER
        if not (d_right.is_joker or d_right.is_dimensionless):
            right, d_right = _wrap(right), JOKER
    out, _ = propagate_binary(node.op, d_left, d_right, rng)
    return Binary(node.op, left, right), out


def repair(tree: ExprTree, var_units: Sequence[UnitVector], target_unit: UnitVector,
           rng: np.random.Generator, max_complexity: Optional[int] = None) -> ExprTree:
    """Insert multiplicative constants wherever a unit rule would be broken.

    Each offending operand ``t`` becomes ``c * t`` with a fresh constant set
    to 1.0, which turns it into a joker. A known root unit that differs from
    the target gets one more constant on the whole tree. Valid trees come
    back unchanged. Raises :class:`RepairFailed` when the result is larger
    than ``max_complexity``.
    """
    root, unit = _repair(tree.root, var_units, rng)
    if manhattan_distance(unit, target_unit) != 0:
        root = _wrap(root)
    if root == tree.root:
        return tree
    repaired = make_tree(root, tree.constants)
    if max_complexity is not None and complexity(repaired) > max_complexity:
        raise RepairFailed(
            f"repaired tree has complexity {complexity(repaired)} > {max_complexity}")
    return repaired
