"""Domain filters registered on every template environment.

Undefined values pass straight through so that permissive renders keep the
``MISSING(key)`` placeholder instead of failing inside a filter.
"""
from typing import Any, Callable, Dict

from jinja2 import Undefined
from jinja2.filters import do_round
from marko.ext.gfm import gfm

from datamodel.timescales import Epoch, TimeScale, format_epoch
from datamodel.units import Quantity, parse_quantity_text
from datamodel.value import Markdown, Table, render_text
from utils.errors import InvalidValue


def _passes_undefined(func: Callable) -> Callable:
    def wrapper(value, *args, **kwargs):
        if isinstance(value, Undefined):
            return value
        return func(value, *args, **kwargs)
    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


@_passes_undefined
def to_unit(value: Any, unit: str) -> Quantity:
    """``{{ thrust | to('kN') }}``"""
    if not isinstance(value, Quantity):
        raise InvalidValue(f"'to' needs a quantity, got {type(value).__name__}")
    return value.to(unit)


@_passes_undefined
def to_scale(value: Any, scale: str) -> Epoch:
    """``{{ launch | scale('TDB') }}``"""
    if not isinstance(value, Epoch):
        raise InvalidValue(f"'scale' needs an epoch, got {type(value).__name__}")
    try:
        target = TimeScale(scale)
    except ValueError:
        raise InvalidValue(f"unsupported time scale '{scale}'; expected UTC or TDB") from None
    return value.to(target)


@_passes_undefined
def round_value(value: Any, precision: int = 0, method: str = "common") -> Any:
    if isinstance(value, Quantity):
        return Quantity(do_round(value.magnitude, precision, method), value.unit)
    return do_round(value, precision, method)


@_passes_undefined
def table(value: Any) -> str:
    if not isinstance(value, Table):
        raise InvalidValue(f"'table' needs a table, got {type(value).__name__}")
    return value.to_markdown()


@_passes_undefined
def parse_qty(value: Any) -> Quantity:
    if isinstance(value, Quantity):
        return value
    return parse_quantity_text(str(value))


@_passes_undefined
def markdown(value: Any) -> str:
    """Markdown (or plain text) to HTML."""
    text = value.body if isinstance(value, Markdown) else render_text(value)
    return gfm(text)


@_passes_undefined
def iso(value: Any) -> str:
    if not isinstance(value, Epoch):
        raise InvalidValue(f"'iso' needs an epoch, got {type(value).__name__}")
    return format_epoch(value, with_scale=False)


FILTERS: Dict[str, Callable] = {
    "to": to_unit,
    "scale": to_scale,
    "round": round_value,
    "table": table,
    "parse_qty": parse_qty,
    "markdown": markdown,
    "iso": iso,
}


__all__ = ["FILTERS"]
