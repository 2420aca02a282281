"""Physical units: symbol table, expression parser and quantity conversion.

A unit expression such as ``kg*m/s^2`` is parsed with pyparsing into a
:class:`UnitExpr` holding its dimension exponents and the exact factor that
converts one unit of it to coherent SI. Angle is a base dimension, so ``deg``
converts to ``rad`` but never to a dimensionless number.
"""
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

from pyparsing import (
    Literal,
    OpAssoc,
    ParseException,
    ParseResults,
    ParserElement,
    Regex,
    infix_notation,
    one_of,
)

from utils.errors import DimensionMismatch, InvalidValue, MalformedExpression, UnknownUnitSymbol

ParserElement.enable_packrat()

DIMENSIONS = ("length", "mass", "time", "current", "temperature", "amount", "luminosity", "angle")
UNIT_TABLE_PATH = Path(__file__).parent / "data" / "units.txt"

SI_PREFIXES: Dict[str, Fraction] = {
    "Y": Fraction(10) ** 24, "Z": Fraction(10) ** 21, "E": Fraction(10) ** 18,
    "P": Fraction(10) ** 15, "T": Fraction(10) ** 12, "G": Fraction(10) ** 9,
    "M": Fraction(10) ** 6, "k": Fraction(10) ** 3, "h": Fraction(10) ** 2,
    "da": Fraction(10), "d": Fraction(1, 10), "c": Fraction(1, 100),
    "m": Fraction(1, 10 ** 3), "u": Fraction(1, 10 ** 6), "µ": Fraction(1, 10 ** 6),
    "μ": Fraction(1, 10 ** 6), "n": Fraction(1, 10 ** 9), "p": Fraction(1, 10 ** 12),
    "f": Fraction(1, 10 ** 15), "a": Fraction(1, 10 ** 18), "z": Fraction(1, 10 ** 21),
    "y": Fraction(1, 10 ** 24),
}

Dims = Tuple[Fraction, ...]
DIMENSIONLESS: Dims = tuple(Fraction(0) for _ in DIMENSIONS)


class UnitDefinition(NamedTuple):
    symbol: str
    dims: Dims
    scale: Fraction
    prefixable: bool


@dataclass(frozen=True)
class UnitExpr:
    dims: Dims
    scale: Fraction
    label: str

    def __post_init__(self):
        if len(self.dims) != len(DIMENSIONS):
            raise InvalidValue(f"unit dims must have {len(DIMENSIONS)} exponents")
        if self.scale <= 0:
            raise InvalidValue(f"unit scale must be positive, got {self.scale}")

    def convertible_to(self, other: "UnitExpr") -> bool:
        return self.dims == other.dims

    @property
    def is_dimensionless(self) -> bool:
        return self.dims == DIMENSIONLESS

    def describe_dims(self) -> str:
        parts = []
        for name, exp in zip(DIMENSIONS, self.dims):
            if exp:
                parts.append(name if exp == 1 else f"{name}^{_format_exponent(exp)}")
        return "*".join(parts) or "dimensionless"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Quantity:
    magnitude: float
    unit: UnitExpr

    def __post_init__(self):
        if isinstance(self.magnitude, bool) or not isinstance(self.magnitude, (int, float)):
            raise InvalidValue(f"quantity magnitude must be a number, got {self.magnitude!r}")
        if not math.isfinite(self.magnitude):
            raise InvalidValue(f"quantity magnitude must be finite, got {self.magnitude!r}")
        object.__setattr__(self, "magnitude", float(self.magnitude))

    def to(self, target) -> "Quantity":
        if isinstance(target, str):
            target = parse_unit(target)
        return convert_quantity(self, target)

    def __str__(self) -> str:
        if self.unit.label == "1":
            return repr(self.magnitude)
        return f"{self.magnitude!r} {self.unit.label}"


# ========== symbol table ==========

@lru_cache(maxsize=1)
def unit_table() -> Dict[str, UnitDefinition]:
    """Load the shipped symbol table (see ``data/units.txt`` for the format)."""
    table: Dict[str, UnitDefinition] = {}
    with open(UNIT_TABLE_PATH, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) not in (10, 11) or (len(fields) == 11 and fields[10] != "prefix"):
                raise ValueError(f"{UNIT_TABLE_PATH}:{lineno}: malformed unit entry")
            symbol = fields[0]
            dims = tuple(Fraction(x) for x in fields[1:9])
            table[symbol] = UnitDefinition(symbol, dims, Fraction(fields[9]), len(fields) == 11)
    return table


def _lookup_symbol(symbol: str) -> Optional[Tuple[Dims, Fraction]]:
    table = unit_table()
    exact = table.get(symbol)
    if exact is not None:
        return exact.dims, exact.scale
    # longest prefix first so "da" wins over "d"
    for prefix in sorted(SI_PREFIXES, key=len, reverse=True):
        if symbol.startswith(prefix) and len(symbol) > len(prefix):
            base = table.get(symbol[len(prefix):])
            if base is not None and base.prefixable:
                return base.dims, base.scale * SI_PREFIXES[prefix]
    return None


# ========== grammar ==========

class _Atom:
    """A located leaf of a unit expression (a symbol or a number)."""
    __slots__ = ("text", "start", "end", "is_number")

    def __init__(self, text: str, start: int, end: int, is_number: bool):
        self.text = text
        self.start = start
        self.end = end
        self.is_number = is_number


def _atom_action(is_number):
    def action(s, loc, toks):
        text = toks[0]
        # pyparsing reports loc before skipped whitespace
        start = s.index(text, loc)
        return _Atom(text, start, start + len(text), is_number)
    return action


_number = Regex(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?").set_parse_action(_atom_action(True))
_symbol = Regex(r"[A-Za-zµμΩ]+").set_parse_action(_atom_action(False))
_UNIT_GRAMMAR = infix_notation(
    _number | _symbol,
    [
        (Literal("^"), 2, OpAssoc.RIGHT),
        (one_of("* /"), 2, OpAssoc.LEFT),
    ],
)


class _Term:
    """Intermediate value while folding a parse tree: numeric factor and symbol powers."""
    __slots__ = ("factor", "powers", "dims", "scale")

    def __init__(self, factor=Fraction(1), powers=None, dims=DIMENSIONLESS, scale=Fraction(1)):
        self.factor = factor
        self.powers: List[List] = powers or []
        self.dims = dims
        self.scale = scale

    @property
    def is_number(self) -> bool:
        return not self.powers and self.dims == DIMENSIONLESS and self.scale == 1

    def combine(self, other: "_Term", sign: int) -> "_Term":
        powers = [list(p) for p in self.powers]
        for symbol, exp in other.powers:
            for p in powers:
                if p[0] == symbol:
                    p[1] += sign * exp
                    break
            else:
                powers.append([symbol, sign * exp])
        factor = self.factor * other.factor if sign > 0 else self.factor / other.factor
        scale = self.scale * other.scale if sign > 0 else self.scale / other.scale
        dims = tuple(a + sign * b for a, b in zip(self.dims, other.dims))
        return _Term(factor, powers, dims, scale)

    def power(self, exponent: Fraction) -> "_Term":
        powers = [[symbol, exp * exponent] for symbol, exp in self.powers]
        if exponent.denominator != 1 and (self.factor != 1 or self.scale != 1):
            factor = Fraction(float(self.factor) ** float(exponent))
            scale = Fraction(float(self.scale) ** float(exponent))
        else:
            factor = self.factor ** exponent
            scale = self.scale ** exponent
        return _Term(factor, powers, tuple(d * exponent for d in self.dims), scale)


def _evaluate(node, text: str) -> _Term:
    if isinstance(node, _Atom):
        if node.is_number:
            return _Term(factor=Fraction(node.text))
        found = _lookup_symbol(node.text)
        if found is None:
            raise UnknownUnitSymbol(text, node.start, node.end)
        dims, scale = found
        return _Term(powers=[[node.text, Fraction(1)]], dims=dims, scale=scale)

    items = list(node) if isinstance(node, (ParseResults, list)) else [node]
    if len(items) == 1:
        return _evaluate(items[0], text)
    if items[1] == "^":
        # right associative: fold from the end
        result = _evaluate(items[-1], text)
        for operand in reversed(items[:-1:2]):
            if not result.is_number:
                raise MalformedExpression(text, reason="exponent must be a number")
            result = _evaluate(operand, text).power(result.factor)
        return result
    result = _evaluate(items[0], text)
    for op, operand in zip(items[1::2], items[2::2]):
        result = result.combine(_evaluate(operand, text), 1 if op == "*" else -1)
    return result


def _format_exponent(exp: Fraction) -> str:
    if exp.denominator == 1:
        return str(exp.numerator)
    return f"({exp.numerator}/{exp.denominator})"


def _label(term: _Term) -> str:
    numerator = [(s, e) for s, e in term.powers if e > 0]
    denominator = [(s, -e) for s, e in term.powers if e < 0]

    def render(symbol, exp):
        return symbol if exp == 1 else f"{symbol}^{_format_exponent(exp)}"

    head = []
    if term.factor != 1 or not numerator:
        head.append(str(term.factor))
    head.extend(render(s, e) for s, e in numerator)
    label = "*".join(head)
    for s, e in denominator:
        label += "/" + render(s, e)
    return label


@lru_cache(maxsize=1024)
def parse_unit(text: str) -> UnitExpr:
    """Parse a unit expression into dims, exact scale and canonical label.

    Raises:
        UnknownUnitSymbol: a symbol is neither in the table nor a prefixed
            prefixable entry.
        MalformedExpression: the text is not a valid expression.
    """
    if not isinstance(text, str) or not text.strip():
        raise MalformedExpression(str(text), reason="empty unit expression")
    try:
        tree = _UNIT_GRAMMAR.parse_string(text, parse_all=True)
    except ParseException as e:
        raise MalformedExpression(text, e.loc) from None
    term = _evaluate(tree, text)
    scale = term.scale * term.factor
    if scale <= 0:
        raise MalformedExpression(text, reason="unit scale must be positive")
    return UnitExpr(term.dims, scale, _label(term))


def convert_quantity(q: Quantity, target: UnitExpr) -> Quantity:
    """Return ``q`` expressed in ``target``; ``q`` itself is unchanged."""
    if not q.unit.convertible_to(target):
        raise DimensionMismatch(q.unit.label, target.label)
    # one rounding step: exact rational product, then float
    return Quantity(float(Fraction(q.magnitude) * (q.unit.scale / target.scale)), target)


_QUANTITY_TEXT = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)\s+(\S.*?)\s*$")


def parse_quantity_text(text: str) -> Quantity:
    """Parse ``"<number> <unit-expr>"`` text on demand (never applied at load)."""
    match = _QUANTITY_TEXT.match(text or "")
    if not match:
        raise MalformedExpression(str(text), reason="expected '<number> <unit>'")
    return Quantity(float(match.group(1)), parse_unit(match.group(2)))


__all__ = [
    "DIMENSIONS",
    "UnitExpr",
    "Quantity",
    "parse_unit",
    "convert_quantity",
    "parse_quantity_text",
    "unit_table",
]
