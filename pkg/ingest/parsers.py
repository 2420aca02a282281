"""Format-specific parsers producing the generic value type.

Every parser returns plain Python data which is then converted with
:func:`datamodel.value.to_value` and passed through
:func:`ingest.coerce.coerce_domain_types`. No schema is applied.
"""
import csv
import io
import json
import re
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import yaml
from openpyxl import load_workbook

from datamodel.records import SEPARATOR, SourceFormat
from datamodel.value import Column, ColumnType, Markdown, Table, ValueMap, table_from_cells, to_value
from ingest.coerce import coerce_domain_types
from ingest.ron import parse_ron
from utils.errors import EncodingError, InvalidValue, ParseError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

def decode_text(data: bytes, fmt: Any, source: str) -> str:
    """Decode UTF-8 (an optional BOM is dropped) or raise EncodingError."""
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        line = data[:e.start].count(b"\n") + 1
        column = e.start - (data.rfind(b"\n", 0, e.start) + 1) + 1
        raise EncodingError(fmt, source, f"not valid UTF-8 ({e.reason})", line=line, column=column) from None


# ========== structured formats ==========

def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


def _unique_pairs(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    for key, value in pairs:
        if key in data:
            raise ValueError(f"duplicate key '{key}'")
        data[key] = value
    return data


def _parse_json(text: str, source: str) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant, object_pairs_hook=_unique_pairs)
    except json.JSONDecodeError as e:
        raise ParseError(SourceFormat.JSON.value, source, e.msg, line=e.lineno, column=e.colno) from None
    except ValueError as e:
        raise ParseError(SourceFormat.JSON.value, source, str(e)) from None


def _yaml_error(fmt: str, source: str, e: yaml.YAMLError, line_offset: int = 0) -> ParseError:
    mark = getattr(e, "problem_mark", None)
    if mark is not None:
        return ParseError(fmt, source, str(getattr(e, "problem", None) or e),
                          line=mark.line + 1 + line_offset, column=mark.column + 1)
    return ParseError(fmt, source, str(e))


def _parse_yaml(text: str, source: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise _yaml_error(SourceFormat.YAML.value, source, e) from None


_TOML_LOCATION = re.compile(r"\(at line (\d+), column (\d+)\)")


def _parse_toml(text: str, source: str) -> Any:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        message = str(e)
        match = _TOML_LOCATION.search(message)
        if match:
            message = message[:match.start()].strip()
            raise ParseError(SourceFormat.TOML.value, source, message,
                             line=int(match.group(1)), column=int(match.group(2))) from None
        raise ParseError(SourceFormat.TOML.value, source, message) from None


# ========== tables ==========

_INT_TEXT = re.compile(r"^[+-]?\d+$")
_FLOAT_TEXT = re.compile(r"^[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?$")
_NON_FINITE_TEXT = re.compile(r"^[+-]?(?:nan|inf|infinity)$", re.IGNORECASE)


def _infer_csv_column(name: str, cells: List[str], source: str = "<csv>", lines: Sequence[int] = (),
                      column: Optional[int] = None) -> Tuple[Column, List[Any]]:
    """Type one CSV column: Bool, or the narrowest of Int, Float, Text.

    Raises:
        ParseError: an otherwise numeric column holds ``nan`` or ``inf``.
    """
    present = [c for c in cells if c != ""]
    nullable = len(present) != len(cells)
    if present and all(c.lower() in ("true", "false") for c in present):
        return Column(name, ColumnType.BOOL, nullable), [None if c == "" else c.lower() == "true" for c in cells]
    if present and all(_INT_TEXT.match(c) for c in present):
        return Column(name, ColumnType.INT, nullable), [None if c == "" else int(c) for c in cells]
    if present and all(_FLOAT_TEXT.match(c) or _NON_FINITE_TEXT.match(c) for c in present):
        for index, cell in enumerate(cells):
            if _NON_FINITE_TEXT.match(cell):
                line = lines[index] if index < len(lines) else None
                raise ParseError(SourceFormat.CSV.value, source, f"column '{name}' holds non-finite number '{cell}'",
                                 line=line, column=column)
        return Column(name, ColumnType.FLOAT, nullable), [None if c == "" else float(c) for c in cells]
    return Column(name, ColumnType.TEXT, nullable), [None if c == "" else c for c in cells]


def _check_header(fmt: str, source: str, names: List[Any]) -> List[str]:
    seen = set()
    result = []
    for index, name in enumerate(names, start=1):
        text = "" if name is None else str(name).strip()
        if not text:
            raise ParseError(fmt, source, f"header cell {index} is empty", line=1, column=index)
        if text in seen:
            raise ParseError(fmt, source, f"duplicate column name '{text}'", line=1, column=index)
        seen.add(text)
        result.append(text)
    return result


def _parse_csv(text: str, source: str) -> Table:
    fmt = SourceFormat.CSV.value
    reader = csv.reader(io.StringIO(text, newline=""))
    rows: List[Tuple[int, List[str]]] = []
    try:
        for record in reader:
            if record:
                rows.append((reader.line_num, record))
    except csv.Error as e:
        raise ParseError(fmt, source, str(e), line=reader.line_num) from None
    if not rows:
        raise ParseError(fmt, source, "a header row is required")
    names = _check_header(fmt, source, rows[0][1])
    body = []
    lines = [line_num for line_num, _ in rows[1:]]
    for line_num, record in rows[1:]:
        if len(record) != len(names):
            raise ParseError(fmt, source, f"row has {len(record)} cells, header has {len(names)}", line=line_num)
        body.append([cell.strip() for cell in record])
    columns = []
    converted = []
    for index, name in enumerate(names):
        column, cells = _infer_csv_column(name, [row[index] for row in body], source, lines, index + 1)
        columns.append(column)
        converted.append(cells)
    try:
        for cells in converted:
            for cell in cells:
                to_value(cell)
        return Table(tuple(columns), tuple(tuple(col[i] for col in converted) for i in range(len(body))))
    except InvalidValue as e:
        raise ParseError(fmt, source, e.message) from None


def _sheet_rows(ws) -> Tuple[List[Any], List[List[Any]]]:
    rows = [list(r) for r in ws.iter_rows(values_only=True)]
    while rows and all(c is None for c in rows[-1]):
        rows.pop()
    if not rows:
        return [], []
    width = len(rows[0])
    while width and rows[0][width - 1] is None and all(len(r) < width or r[width - 1] is None for r in rows):
        width -= 1
    header = rows[0][:width]
    body = [(r + [None] * width)[:width] for r in rows[1:]]
    return header, body


def _parse_xlsx(data: bytes, source: str) -> ValueMap:
    fmt = SourceFormat.XLSX.value
    try:
        workbook = load_workbook(io.BytesIO(data), read_only=True, data_only=True)
    except Exception as e:
        raise ParseError(fmt, source, f"unreadable workbook: {e}") from None
    sheets: Dict[str, Table] = {}
    try:
        for ws in workbook.worksheets:
            name = ws.title
            if not name or SEPARATOR in name:
                raise ParseError(fmt, source, f"sheet name '{name}' cannot be used as a key segment")
            header, body = _sheet_rows(ws)
            names = _check_header(fmt, f"{source}[{name}]", header)
            try:
                cells = [[to_value(c) for c in row] for row in body]
                sheets[name] = table_from_cells(names, cells)
            except InvalidValue as e:
                raise ParseError(fmt, f"{source}[{name}]", e.message) from None
    finally:
        workbook.close()
    return ValueMap(sheets)


# ========== markdown ==========

_FRONT_MATTER = re.compile(r"\A---[ \t]*\r?\n(.*?)(?:^|\r?\n)(?:---|\.\.\.)[ \t]*(?:\r?\n|\Z)", re.DOTALL | re.MULTILINE)


def _parse_markdown(text: str, source: str) -> Markdown:
    match = _FRONT_MATTER.match(text)
    if not match:
        return Markdown(text, None)
    try:
        front = yaml.safe_load(match.group(1))
    except yaml.YAMLError as e:
        raise _yaml_error(SourceFormat.MARKDOWN.value, source, e, line_offset=1) from None
    if front is None:
        front = {}
    if not isinstance(front, dict):
        raise ParseError(SourceFormat.MARKDOWN.value, source, "front matter must be a mapping", line=2)
    try:
        front_matter = to_value(front)
    except InvalidValue as e:
        raise ParseError(SourceFormat.MARKDOWN.value, source, e.message) from None
    return Markdown(text[match.end():], front_matter)


_TEXT_PARSERS: Dict[SourceFormat, Callable[[str, str], Any]] = {
    SourceFormat.JSON: _parse_json,
    SourceFormat.YAML: _parse_yaml,
    SourceFormat.TOML: _parse_toml,
    SourceFormat.RON: parse_ron,
    SourceFormat.CSV: _parse_csv,
    SourceFormat.MARKDOWN: _parse_markdown,
}


def parse_file(data: bytes, fmt: SourceFormat, source: Optional[str] = None) -> Any:
    """Parse file bytes of format ``fmt`` into a coerced Value.

    Args:
        data: raw file contents.
        fmt: the detected source format.
        source: path used in error messages.

    Raises:
        EncodingError: a text format that is not UTF-8.
        ParseError: the bytes do not follow the format grammar or hold a
            value the generic type cannot represent.
        CoercionError: a {value, unit} or {epoch, scale} shape is malformed.
    """
    source = source or f"<{fmt.value.lower()}>"
    if fmt == SourceFormat.XLSX:
        native = _parse_xlsx(data, source)
    else:
        text = decode_text(data, fmt.value, source)
        native = _TEXT_PARSERS[fmt](text, source)
    try:
        value = to_value(native)
    except InvalidValue as e:
        raise ParseError(fmt.value, source, e.message) from None
    return coerce_domain_types(value)


__all__ = ["parse_file", "decode_text"]
