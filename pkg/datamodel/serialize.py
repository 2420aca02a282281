"""Deterministic byte encoding and tagged JSON form of Values.

The byte encoding is structural: every node is a one-byte variant tag
followed by length-prefixed payloads, map keys are sorted and floats use the
shortest round-trip decimal text. Two Quantities that are physically equal
but stored in different units encode differently.
"""
import base64
import json
import struct
from typing import Any, Dict

from datamodel.records import ProvenanceRecord
from datamodel.timescales import format_epoch
from datamodel.value import ValueKind, kind_of

_TAGS = {
    ValueKind.NULL: b"N",
    ValueKind.BOOL: b"B",
    ValueKind.INT: b"I",
    ValueKind.FLOAT: b"F",
    ValueKind.TEXT: b"T",
    ValueKind.BYTES: b"Y",
    ValueKind.QUANTITY: b"Q",
    ValueKind.EPOCH: b"E",
    ValueKind.TABLE: b"G",
    ValueKind.MARKDOWN: b"M",
    ValueKind.PROVENANCE: b"P",
    ValueKind.ANNOTATION: b"A",
    ValueKind.SEQUENCE: b"S",
    ValueKind.MAP: b"D",
}


def _chunk(payload: bytes) -> bytes:
    return struct.pack(">Q", len(payload)) + payload


def _text(text: str) -> bytes:
    return _chunk(text.encode("utf-8"))


def _count(n: int) -> bytes:
    return struct.pack(">Q", n)


def _encode(v: Any, out: bytearray) -> None:
    kind = kind_of(v)
    out += _TAGS[kind]
    if kind == ValueKind.NULL:
        return
    if kind == ValueKind.BOOL:
        out += b"\x01" if v else b"\x00"
    elif kind == ValueKind.INT:
        out += _text(str(v))
    elif kind == ValueKind.FLOAT:
        out += _text(repr(v))
    elif kind == ValueKind.TEXT:
        out += _text(v)
    elif kind == ValueKind.BYTES:
        out += _chunk(v)
    elif kind == ValueKind.QUANTITY:
        out += _text(repr(v.magnitude))
        out += _text(v.unit.label)
    elif kind == ValueKind.EPOCH:
        out += _text(v.scale.value)
        out += _text(repr(v.days))
    elif kind == ValueKind.TABLE:
        out += _count(len(v.columns))
        for column in v.columns:
            out += _text(column.name)
            out += _text(column.ctype.value)
            out += b"\x01" if column.nullable else b"\x00"
        out += _count(len(v.rows))
        for row in v.rows:
            for cell in row:
                _encode(cell, out)
    elif kind == ValueKind.MARKDOWN:
        out += _text(v.body)
        _encode(v.front_matter, out)
    elif kind == ValueKind.PROVENANCE:
        out += _text(v.source_path)
        out += _text(v.format.value if v.format is not None else "")
        out += _text(v.content_hash)
        out += _text(str(v.origin))
        out += _text(str(v.load_sequence))
    elif kind == ValueKind.ANNOTATION:
        out += _text(str(v.target))
        out += _text(v.kind.value)
        out += _text(v.author)
        out += _text(v.body)
        _encode(v.timestamp, out)
    elif kind == ValueKind.SEQUENCE:
        out += _count(len(v))
        for item in v:
            _encode(item, out)
    elif kind == ValueKind.MAP:
        out += _count(len(v))
        for key in sorted(v):
            out += _text(key)
            _encode(v[key], out)


def canonical_serialize(v: Any) -> bytes:
    """Encode ``v`` so that byte equality coincides with structural equality."""
    out = bytearray()
    _encode(v, out)
    return bytes(out)


def provenance_to_json(p: ProvenanceRecord) -> Dict[str, Any]:
    return {
        "source_path": p.source_path,
        "format": p.format.value if p.format is not None else None,
        "content_hash": p.content_hash,
        "origin": p.origin.kind.value,
        "bundle": p.origin.bundle,
        "load_sequence": p.load_sequence,
    }


def to_tagged_json(v: Any) -> Dict[str, Any]:
    """JSON-ready form of a Value where every node names its variant."""
    kind = kind_of(v)
    if kind in (ValueKind.NULL, ValueKind.BOOL, ValueKind.INT, ValueKind.FLOAT, ValueKind.TEXT):
        payload: Any = v
    elif kind == ValueKind.BYTES:
        payload = base64.b64encode(v).decode("ascii")
    elif kind == ValueKind.QUANTITY:
        payload = {"magnitude": v.magnitude, "unit": v.unit.label}
    elif kind == ValueKind.EPOCH:
        payload = {"scale": v.scale.value, "days": v.days, "iso": format_epoch(v, with_scale=False)}
    elif kind == ValueKind.TABLE:
        payload = {
            "columns": [{"name": c.name, "type": c.ctype.value, "nullable": c.nullable} for c in v.columns],
            "rows": [[to_tagged_json(cell) for cell in row] for row in v.rows],
        }
    elif kind == ValueKind.MARKDOWN:
        payload = {
            "body": v.body,
            "front_matter": None if v.front_matter is None else to_tagged_json(v.front_matter),
        }
    elif kind == ValueKind.PROVENANCE:
        payload = provenance_to_json(v)
    elif kind == ValueKind.ANNOTATION:
        payload = {
            "target": str(v.target),
            "kind": v.kind.value,
            "author": v.author,
            "body": v.body,
            "timestamp": format_epoch(v.timestamp),
        }
    elif kind == ValueKind.SEQUENCE:
        payload = [to_tagged_json(item) for item in v]
    else:
        payload = {key: to_tagged_json(v[key]) for key in sorted(v)}
    return {"type": kind.value, "value": payload}


def dumps_tagged(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


__all__ = ["canonical_serialize", "to_tagged_json", "provenance_to_json", "dumps_tagged"]
