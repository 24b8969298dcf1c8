"""SI unit vectors with exact rational exponents and the joker unit.

A :class:`UnitVector` is either a known unit (seven exponents over
``m, kg, s, A, K, mol, cd``) or the joker, the placeholder unit carried by
fitted constants whose physical unit is not known in advance.

The propagation rules map each operation and its operand units to an output
unit plus a flag telling whether the operation broke a unit rule.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "BASE_UNITS",
    "UnitVector",
    "JOKER",
    "DIMENSIONLESS",
    "OpKind",
    "Op",
    "BINARY_KINDS",
    "UNARY_KINDS",
    "propagate_binary",
    "propagate_unary",
    "manhattan_distance",
    "parse_unit",
    "format_unit",
]

BASE_UNITS: Tuple[str, ...] = ("m", "kg", "s", "A", "K", "mol", "cd")


@dataclass(frozen=True)
class UnitVector:
    """Exponents over the SI base units, or the joker when ``exponents`` is None."""

    exponents: Optional[Tuple[Fraction, ...]]

    def __post_init__(self):
        if self.exponents is not None:
            exps = tuple(Fraction(e) for e in self.exponents)
            if len(exps) != len(BASE_UNITS):
                raise ValueError(f"expected {len(BASE_UNITS)} exponents, got {len(exps)}")
            object.__setattr__(self, "exponents", exps)

    @classmethod
    def known(cls, *exponents) -> "UnitVector":
        """Build a known unit; trailing base units may be omitted."""
        if len(exponents) == 1 and not isinstance(exponents[0], (int, Fraction, str)):
            exponents = tuple(exponents[0])
        exps = list(exponents) + [0] * (len(BASE_UNITS) - len(exponents))
        return cls(tuple(Fraction(e) for e in exps))

    @property
    def is_joker(self) -> bool:
        return self.exponents is None

    @property
    def is_dimensionless(self) -> bool:
        return self.exponents is not None and not any(self.exponents)

    def __mul__(self, other: "UnitVector") -> "UnitVector":
        if self.is_joker or other.is_joker:
            return JOKER
        return UnitVector(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __truediv__(self, other: "UnitVector") -> "UnitVector":
        if self.is_joker or other.is_joker:
            return JOKER
        return UnitVector(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def __pow__(self, k) -> "UnitVector":
        if self.is_joker:
            return JOKER
        k = Fraction(k)
        return UnitVector(tuple(a * k for a in self.exponents))

    def __str__(self) -> str:
        return format_unit(self)

    def __repr__(self) -> str:
        if self.is_joker:
            return "UnitVector(JOKER)"
        return "UnitVector([" + ", ".join(str(e) for e in self.exponents) + "])"


JOKER = UnitVector(None)
DIMENSIONLESS = UnitVector.known()


class OpKind(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    EXP = "exp"
    LOG = "log"
    SIN = "sin"
    COS = "cos"
    TAN = "tan"
    SQRT = "sqrt"
    FIXED_POW = "pow"
    BINARY_POW = "^"


BINARY_KINDS = frozenset({OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.DIV, OpKind.BINARY_POW})
UNARY_KINDS = frozenset(set(OpKind) - BINARY_KINDS)
_DIMENSIONLESS_INPUT = frozenset({OpKind.EXP, OpKind.LOG, OpKind.SIN, OpKind.COS, OpKind.TAN})


@dataclass(frozen=True)
class Op:
    """An operation of the function set; ``k`` is only used by FIXED_POW."""

    kind: OpKind
    k: int = 0

    def __post_init__(self):
        if self.kind is OpKind.FIXED_POW:
            if int(self.k) != self.k or self.k < 2:
                raise ValueError(f"fixed power needs an integer exponent >= 2, got {self.k!r}")
        elif self.k:
            raise ValueError(f"{self.kind.name} takes no exponent")

    @property
    def arity(self) -> int:
        return 2 if self.kind in BINARY_KINDS else 1

    @property
    def symbol(self) -> str:
        if self.kind is OpKind.FIXED_POW:
            return f"pow{self.k}"
        return self.kind.value

    @classmethod
    def from_symbol(cls, symbol: str) -> "Op":
        """Inverse of :attr:`symbol`; also accepts ``square``/``cube`` aliases."""
        aliases = {"square": "pow2", "cube": "pow3", "add": "+", "sub": "-",
                   "mul": "*", "div": "/", "binpow": "^"}
        symbol = aliases.get(symbol, symbol)
        m = re.fullmatch(r"pow(\d+)", symbol)
        if m:
            return cls(OpKind.FIXED_POW, int(m.group(1)))
        for kind in OpKind:
            if kind.value == symbol and kind is not OpKind.FIXED_POW:
                return cls(kind)
        raise ValueError(f"unknown operation symbol {symbol!r}")

    def __str__(self) -> str:
        return self.symbol


def _as_op(op) -> Op:
    return op if isinstance(op, Op) else Op(op)


def propagate_binary(op, left: UnitVector, right: UnitVector,
                     rng: np.random.Generator) -> Tuple[UnitVector, bool]:
    """Output unit and violation flag of a binary operation.

    ``rng`` is only consumed when addition/subtraction sees two different
    known units; the returned unit is then a uniform pick of either operand.
    """
    op = _as_op(op)
    kind = op.kind
    if kind not in BINARY_KINDS:
        raise ValueError(f"{kind.name} is not a binary operation")
    if kind in (OpKind.ADD, OpKind.SUB):
        if left.is_joker:
            return right, False
        if right.is_joker or left == right:
            return left, False
        return (left if rng.integers(2) == 0 else right), True
    if kind is OpKind.MUL:
        return left * right, False
    if kind is OpKind.DIV:
        return left / right, False
    # binary power: jokers count as dimensionless
    ok = (left.is_joker or left.is_dimensionless) and (right.is_joker or right.is_dimensionless)
    return DIMENSIONLESS, not ok


def propagate_unary(op, child: UnitVector) -> Tuple[UnitVector, bool]:
    """Output unit and violation flag of a unary operation."""
    op = _as_op(op)
    kind = op.kind
    if kind not in UNARY_KINDS:
        raise ValueError(f"{kind.name} is not a unary operation")
    if kind in _DIMENSIONLESS_INPUT:
        return DIMENSIONLESS, not (child.is_joker or child.is_dimensionless)
    if kind is OpKind.SQRT:
        return child ** Fraction(1, 2), False
    return child ** op.k, False


def manhattan_distance(a: UnitVector, b: UnitVector) -> Fraction:
    """L1 distance between exponent vectors; zero if either side is the joker."""
    if a.is_joker or b.is_joker:
        return Fraction(0)
    return sum((abs(x - y) for x, y in zip(a.exponents, b.exponents)), Fraction(0))


_TOKEN = re.compile(r"^([A-Za-z]+)(?:\^([+-]?\d+(?:/\d+)?))?$")


def parse_unit(text: str) -> UnitVector:
    """Parse ``"m^1 kg^1 s^-2"`` style text; ``"*"`` is the joker, ``""`` dimensionless.

    A bare base name means exponent 1 and repeated bases accumulate.
    """
    text = text.strip()
    if text == "*":
        return JOKER
    exps = [Fraction(0)] * len(BASE_UNITS)
    for token in text.split():
        m = _TOKEN.match(token)
        if not m or m.group(1) not in BASE_UNITS:
            raise ValueError(f"malformed unit token {token!r} in {text!r}")
        exps[BASE_UNITS.index(m.group(1))] += Fraction(m.group(2) or 1)
    return UnitVector(tuple(exps))


def format_unit(unit: UnitVector) -> str:
    """Inverse of :func:`parse_unit`; zero exponents are omitted."""
    if unit.is_joker:
        return "*"
    return " ".join(f"{b}^{e}" for b, e in zip(BASE_UNITS, unit.exponents) if e)
