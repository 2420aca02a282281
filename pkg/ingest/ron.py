"""RON (Rusty Object Notation) reader built on pyparsing.

RON constructs map onto the generic value type as follows: named and
anonymous structs become Maps (the struct name is dropped), tuples and
lists become Sequences, ``Some(x)`` and newtype wrappers become ``x``,
``None`` and ``()`` become Null, unit enum variants become Text.
"""
from typing import Any, List

from pyparsing import (
    Forward,
    Opt,
    ParseBaseException,
    ParserElement,
    QuotedString,
    Regex,
    Suppress,
    ZeroOrMore,
    cpp_style_comment,
)

from utils.errors import InvalidValue, ParseError

ParserElement.enable_packrat()


class _Node:
    """Wraps a parsed value so pyparsing does not splice sequences into its results."""
    __slots__ = ("value",)

    def __init__(self, value: Any):
        self.value = value


class _Field:
    __slots__ = ("name", "value")

    def __init__(self, name: str, value: Any):
        self.name = name
        self.value = value


class _Entry:
    __slots__ = ("key", "value")

    def __init__(self, key: Any, value: Any):
        self.key = key
        self.value = value


_NON_FINITE = {"inf", "NaN", "nan", "infinity", "Infinity"}


def _ident_value(s, loc, toks):
    name = toks[0]
    if name == "true":
        return _Node(True)
    if name == "false":
        return _Node(False)
    if name == "None":
        return _Node(None)
    if name in _NON_FINITE:
        raise InvalidValue(f"non-finite number '{name}' is not a valid value")
    return _Node(name)


def _int_value(toks):
    return _Node(int(toks[0], 0))


def _float_value(toks):
    return _Node(float(toks[0]))


def _string_value(toks):
    return _Node(toks[0])


def _raw_string_value(toks):
    text = toks[0]
    hashes = len(text) - len(text.lstrip("r").lstrip("#")) - 1
    return _Node(text[2 + hashes:len(text) - 1 - hashes])


def _char_value(toks):
    inner = toks[0][1:-1]
    return _Node(inner.encode("utf-8").decode("unicode_escape") if inner.startswith("\\") else inner)


def _fields_to_map(fields: List[_Field]) -> dict:
    data = {}
    for f in fields:
        if f.name in data:
            raise InvalidValue(f"duplicate struct field '{f.name}'")
        data[f.name] = f.value
    return data


def _struct_value(toks):
    fields = [t for t in toks if isinstance(t, _Field)]
    return _Node(_fields_to_map(fields))


def _tuple_value(toks):
    items = [t.value for t in toks if isinstance(t, _Node)]
    if not items:
        return _Node(None)
    return _Node(list(items))


def _named_value(toks):
    name = toks[0]
    if len(toks) == 1:
        return _ident_value("", 0, [name])
    body = toks[1].value
    if isinstance(body, list) and len(body) == 1:
        # Some(x) and newtype wrappers unwrap to their payload
        return _Node(body[0])
    if name == "Some":
        raise InvalidValue("Some(...) takes exactly one value")
    return _Node(body)


def _list_value(toks):
    return _Node([t.value for t in toks if isinstance(t, _Node)])


def _map_value(toks):
    data = {}
    for entry in toks:
        key = entry.key
        if not isinstance(key, str):
            key = str(key).lower() if isinstance(key, bool) else str(key)
        if key in data:
            raise InvalidValue(f"duplicate map key '{key}'")
        data[key] = entry.value
    return _Node(data)


def _build_grammar() -> ParserElement:
    value = Forward()
    lpar, rpar = Suppress("("), Suppress(")")
    comma, colon = Suppress(","), Suppress(":")

    ident = Regex(r"[A-Za-z_][A-Za-z0-9_]*")
    float_ = Regex(
        r"[+-]?(?:\d[\d_]*\.\d[\d_]*(?:[eE][+-]?\d+)?|\d[\d_]*[eE][+-]?\d+|\.\d+(?:[eE][+-]?\d+)?|\d[\d_]*\.(?![\w.]))"
    ).set_parse_action(_float_value)
    int_ = Regex(r"[+-]?(?:0x[0-9A-Fa-f_]+|0b[01_]+|0o[0-7_]+|\d[\d_]*)").set_parse_action(_int_value)
    string = QuotedString('"', esc_char="\\", multiline=True).set_parse_action(_string_value)
    raw_string = Regex(r'r(#*)"(?:.|\n)*?"\1').set_parse_action(_raw_string_value)
    char = Regex(r"'(?:\\.|[^'\\])'").set_parse_action(_char_value)

    field = (ident + colon + value).set_parse_action(lambda t: _Field(t[0], t[1].value))
    fields = field + ZeroOrMore(comma + field) + Opt(comma)
    struct_body = (lpar + fields + rpar).set_parse_action(_struct_value)
    items = value + ZeroOrMore(comma + value) + Opt(comma)
    tuple_body = (lpar + Opt(items) + rpar).set_parse_action(_tuple_value)

    named = (ident + Opt(struct_body | tuple_body)).set_parse_action(_named_value)
    list_ = (Suppress("[") + Opt(items) + Suppress("]")).set_parse_action(_list_value)
    entry = (value + colon + value).set_parse_action(lambda t: _Entry(t[0].value, t[1].value))
    map_ = (Suppress("{") + Opt(entry + ZeroOrMore(comma + entry) + Opt(comma)) + Suppress("}")).set_parse_action(
        _map_value
    )

    value <<= raw_string | string | char | float_ | int_ | struct_body | tuple_body | list_ | map_ | named

    attribute = Regex(r"#!\[[^\]]*\]")
    document = Suppress(ZeroOrMore(attribute)) + value
    document.ignore(cpp_style_comment)
    return document


_GRAMMAR = _build_grammar()


def parse_ron(text: str, source: str = "<ron>") -> Any:
    """Parse RON text into plain Python data (dicts, lists, scalars).

    Raises:
        ParseError: the text does not follow the grammar, or holds a value
            the generic type cannot represent.
    """
    try:
        result = _GRAMMAR.parse_string(text, parse_all=True)
    except ParseBaseException as e:
        raise ParseError("RON", source, e.msg, line=e.lineno, column=e.col) from None
    except InvalidValue as e:
        raise ParseError("RON", source, e.message) from None
    return result[0].value


__all__ = ["parse_ron"]
