"""The generic value type every data file is normalized into.

A Value is one of fourteen variants. Scalars use native Python types; the
compound and domain variants are immutable classes defined here or in the
sibling modules:

    Null -> None          Bool -> bool        Int -> int (signed 64-bit)
    Float -> float        Text -> str         Bytes -> bytes
    Quantity, Epoch, Table, Markdown, ProvenanceRecord, AnnotationRecord
    Sequence -> tuple     Map -> ValueMap
"""
import base64
import math
from dataclasses import dataclass
from datetime import date, datetime, time
from enum import Enum
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from datamodel.records import SEPARATOR, AnnotationRecord, ProvenanceRecord
from datamodel.timescales import Epoch, epoch_from_datetime, format_epoch
from datamodel.units import Quantity
from utils.errors import InvalidValue

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


class ValueKind(str, Enum):
    NULL = "Null"
    BOOL = "Bool"
    INT = "Int"
    FLOAT = "Float"
    TEXT = "Text"
    BYTES = "Bytes"
    QUANTITY = "Quantity"
    EPOCH = "Epoch"
    TABLE = "Table"
    MARKDOWN = "Markdown"
    PROVENANCE = "Provenance"
    ANNOTATION = "Annotation"
    SEQUENCE = "Sequence"
    MAP = "Map"


class ValueMap(Mapping[str, Any]):
    """Immutable, insertion-ordered, string-keyed map of Values."""
    __slots__ = ("_data",)

    def __init__(self, items: Union[Mapping[str, Any], Iterable[Tuple[str, Any]]] = ()):
        pairs = items.items() if isinstance(items, Mapping) else items
        data: Dict[str, Any] = {}
        for key, value in pairs:
            if not isinstance(key, str) or not key:
                raise InvalidValue(f"map keys must be non-empty text, got {key!r}")
            if SEPARATOR in key:
                raise InvalidValue(f"map key '{key}' contains the reserved separator '.'")
            if key in data:
                raise InvalidValue(f"duplicate map key '{key}'")
            data[key] = value
        object.__setattr__(self, "_data", data)

    def __setattr__(self, name, value):
        raise AttributeError("ValueMap is immutable")

    def __getitem__(self, key: str) -> Any:
        return self._data[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return f"ValueMap({self._data!r})"

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}: {render_text(v)}" for k, v in self._data.items()) + "}"


class ColumnType(str, Enum):
    INT = "Int"
    FLOAT = "Float"
    TEXT = "Text"
    BOOL = "Bool"
    QUANTITY = "Quantity"
    EPOCH = "Epoch"


_CELL_CHECKS = {
    ColumnType.INT: lambda v: isinstance(v, int) and not isinstance(v, bool),
    ColumnType.FLOAT: lambda v: isinstance(v, float),
    ColumnType.TEXT: lambda v: isinstance(v, str),
    ColumnType.BOOL: lambda v: isinstance(v, bool),
    ColumnType.QUANTITY: lambda v: isinstance(v, Quantity),
    ColumnType.EPOCH: lambda v: isinstance(v, Epoch),
}


@dataclass(frozen=True)
class Column:
    name: str
    ctype: ColumnType
    nullable: bool = False


@dataclass(frozen=True)
class Table:
    columns: Tuple[Column, ...]
    rows: Tuple[Tuple[Any, ...], ...]

    def __post_init__(self):
        columns = tuple(self.columns)
        rows = tuple(tuple(row) for row in self.rows)
        names = set()
        for column in columns:
            if not column.name:
                raise InvalidValue("table column names must be non-empty")
            if column.name in names:
                raise InvalidValue(f"duplicate table column '{column.name}'")
            names.add(column.name)
        for index, row in enumerate(rows):
            if len(row) != len(columns):
                raise InvalidValue(f"table row {index} has {len(row)} cells, expected {len(columns)}")
            for column, cell in zip(columns, row):
                if cell is None:
                    if not column.nullable:
                        raise InvalidValue(f"null cell in non-nullable column '{column.name}' (row {index})")
                elif not _CELL_CHECKS[column.ctype](cell):
                    raise InvalidValue(
                        f"cell {cell!r} in column '{column.name}' (row {index}) is not {column.ctype.value}"
                    )
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "rows", rows)

    @property
    def column_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        return self.column_names.index(name)

    def column(self, name: str) -> Tuple[Any, ...]:
        index = self.column_index(name)
        return tuple(row[index] for row in self.rows)

    def row_maps(self) -> Tuple[ValueMap, ...]:
        names = self.column_names
        return tuple(ValueMap(zip(names, row)) for row in self.rows)

    def to_markdown(self) -> str:
        if not self.columns:
            return ""
        lines = ["| " + " | ".join(self.column_names) + " |",
                 "|" + "|".join("---" for _ in self.columns) + "|"]
        for row in self.rows:
            lines.append("| " + " | ".join("" if c is None else render_text(c) for c in row) + " |")
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.to_markdown()


@dataclass(frozen=True)
class Markdown:
    body: str
    front_matter: Optional[ValueMap] = None

    def __post_init__(self):
        if self.front_matter is not None and not isinstance(self.front_matter, ValueMap):
            raise InvalidValue("markdown front matter must be a Map")

    def __str__(self) -> str:
        return self.body


def kind_of(value: Any) -> ValueKind:
    """Classify a Python object as one of the fourteen Value variants."""
    if value is None:
        return ValueKind.NULL
    if isinstance(value, bool):
        return ValueKind.BOOL
    if isinstance(value, int):
        return ValueKind.INT
    if isinstance(value, float):
        return ValueKind.FLOAT
    if isinstance(value, str):
        return ValueKind.TEXT
    if isinstance(value, bytes):
        return ValueKind.BYTES
    if isinstance(value, Quantity):
        return ValueKind.QUANTITY
    if isinstance(value, Epoch):
        return ValueKind.EPOCH
    if isinstance(value, Table):
        return ValueKind.TABLE
    if isinstance(value, Markdown):
        return ValueKind.MARKDOWN
    if isinstance(value, ProvenanceRecord):
        return ValueKind.PROVENANCE
    if isinstance(value, AnnotationRecord):
        return ValueKind.ANNOTATION
    if isinstance(value, tuple):
        return ValueKind.SEQUENCE
    if isinstance(value, ValueMap):
        return ValueKind.MAP
    raise InvalidValue(f"{type(value).__name__} is not a Value variant")


def to_value(obj: Any) -> Any:
    """Convert a parser's native output into an immutable Value tree.

    Raises:
        InvalidValue: non-finite floats, integers outside 64-bit range, bad
            map keys, or types with no Value counterpart.
    """
    if obj is None or isinstance(obj, (bool, str, bytes)):
        return obj
    if isinstance(obj, int):
        if not INT64_MIN <= obj <= INT64_MAX:
            raise InvalidValue(f"integer {obj} is outside the signed 64-bit range")
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise InvalidValue(f"non-finite number {obj!r} is not a valid value")
        return obj
    if isinstance(obj, (Quantity, Epoch, Table, Markdown, ProvenanceRecord, AnnotationRecord, ValueMap)):
        return obj
    if isinstance(obj, (datetime, date)):
        return epoch_from_datetime(obj)
    if isinstance(obj, time):
        return obj.isoformat()
    if isinstance(obj, bytearray):
        return bytes(obj)
    if isinstance(obj, Mapping):
        return ValueMap((str(k) if not isinstance(k, str) else k, to_value(v)) for k, v in obj.items())
    if isinstance(obj, (list, tuple)):
        return tuple(to_value(v) for v in obj)
    if isinstance(obj, (set, frozenset)):
        return tuple(to_value(v) for v in sorted(obj, key=repr))
    raise InvalidValue(f"cannot represent {type(obj).__name__} as a value")


def descend(value: Any, segment: str) -> Any:
    """Step one key segment into ``value``; raises KeyError when it does not resolve.

    Maps resolve by key, Sequences by numeric index, Tables by column name
    (the whole column) or ``rows`` (the row axis, each row a Map), Markdown by
    ``body``/``front_matter`` or a front-matter key.
    """
    if isinstance(value, ValueMap):
        if segment in value:
            return value[segment]
    elif isinstance(value, tuple):
        if segment.lstrip("-").isdigit():
            index = int(segment)
            if -len(value) <= index < len(value):
                return value[index]
    elif isinstance(value, Table):
        if segment in value.column_names:
            return value.column(segment)
        if segment == "rows":
            return value.row_maps()
    elif isinstance(value, Markdown):
        if segment == "body":
            return value.body
        if segment == "front_matter" and value.front_matter is not None:
            return value.front_matter
        if value.front_matter is not None and segment in value.front_matter:
            return value.front_matter[segment]
    raise KeyError(segment)


def descend_path(value: Any, segments: Sequence[str]) -> Tuple[Any, int]:
    """Descend as far as possible; returns (value, number of segments consumed)."""
    current = value
    for depth, segment in enumerate(segments):
        try:
            current = descend(current, segment)
        except KeyError:
            return current, depth
    return current, len(segments)


def render_text(value: Any) -> str:
    """Default text rendering used by templates and reports."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bytes):
        return base64.b64encode(value).decode("ascii")
    if isinstance(value, Epoch):
        return format_epoch(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(render_text(v) for v in value) + "]"
    return str(value)


def infer_column(cells: List[Any]) -> Tuple[ColumnType, bool, List[Any]]:
    """Pick a column type for typed cells, widening Int -> Float -> Text."""
    present = [c for c in cells if c is not None]
    nullable = len(present) != len(cells)
    kinds = {kind_of(c) for c in present}
    if not kinds:
        return ColumnType.TEXT, nullable, cells
    if kinds == {ValueKind.BOOL}:
        return ColumnType.BOOL, nullable, cells
    if kinds == {ValueKind.INT}:
        return ColumnType.INT, nullable, cells
    if kinds <= {ValueKind.INT, ValueKind.FLOAT}:
        return ColumnType.FLOAT, nullable, [None if c is None else float(c) for c in cells]
    if kinds == {ValueKind.EPOCH}:
        return ColumnType.EPOCH, nullable, cells
    if kinds == {ValueKind.QUANTITY}:
        return ColumnType.QUANTITY, nullable, cells
    return ColumnType.TEXT, nullable, [None if c is None else render_text(c) for c in cells]


def table_from_cells(names: Sequence[str], rows: Sequence[Sequence[Any]]) -> Table:
    """Build a Table from typed cells, inferring each column's type."""
    converted_columns = []
    columns = []
    for index, name in enumerate(names):
        ctype, nullable, cells = infer_column([row[index] for row in rows])
        columns.append(Column(name, ctype, nullable))
        converted_columns.append(cells)
    new_rows = [tuple(col[i] for col in converted_columns) for i in range(len(rows))]
    return Table(tuple(columns), tuple(new_rows))


__all__ = [
    "ValueKind",
    "ValueMap",
    "ColumnType",
    "Column",
    "Table",
    "Markdown",
    "kind_of",
    "to_value",
    "descend",
    "descend_path",
    "render_text",
    "infer_column",
    "table_from_cells",
]
