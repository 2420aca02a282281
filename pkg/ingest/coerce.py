"""Eager recognition of quantities and epochs in parsed data.

Only two exact shapes are recognized:

    {value: <number>, unit: <text>}           -> Quantity
    {epoch: <text|number>, scale: UTC|TDB}    -> Epoch

Free text such as ``"3.5 km/s"`` is left alone; the ``parse_qty`` template
filter converts it on demand.
"""
from typing import Any

from datamodel.timescales import Epoch, TimeScale, parse_epoch
from datamodel.units import Quantity, parse_unit
from datamodel.value import Markdown, ValueMap
from utils.errors import CoercionError, TimeError, UnitError

QUANTITY_KEYS = frozenset(("value", "unit"))
EPOCH_KEYS = frozenset(("epoch", "scale"))


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _as_quantity(node: ValueMap) -> Any:
    magnitude, unit_text = node["value"], node["unit"]
    if not _is_number(magnitude) or not isinstance(unit_text, str):
        return None
    try:
        return Quantity(magnitude, parse_unit(unit_text))
    except UnitError as e:
        raise CoercionError(f"{{value, unit}} map with unusable unit: {e.message}",
                            unit=unit_text, cause=type(e).__name__) from e


def _as_epoch(node: ValueMap) -> Any:
    raw, scale_text = node["epoch"], node["scale"]
    if not isinstance(scale_text, str):
        return None
    if not (isinstance(raw, (str, Epoch)) or _is_number(raw)):
        return None
    try:
        scale = TimeScale(scale_text)
    except ValueError:
        raise CoercionError(f"{{epoch, scale}} map with unsupported scale '{scale_text}' (expected UTC or TDB)",
                            scale=scale_text) from None
    if isinstance(raw, Epoch):
        # native YAML/TOML timestamps arrive as UTC calendar readings
        return Epoch(scale, raw.days)
    if isinstance(raw, str):
        try:
            return parse_epoch(raw, scale)
        except TimeError as e:
            raise CoercionError(f"{{epoch, scale}} map with unusable epoch: {e.message}",
                                epoch=raw, cause=type(e).__name__) from e
    return Epoch(scale, raw)


def coerce_domain_types(v: Any) -> Any:
    """Return ``v`` with every recognized shape replaced; ``v`` is not modified.

    Raises:
        CoercionError: a shape is present but its unit, scale or epoch text
            does not parse.
    """
    if isinstance(v, ValueMap):
        # children first, so a second pass finds nothing left to replace
        v = ValueMap((k, coerce_domain_types(child)) for k, child in v.items())
        keys = frozenset(v)
        if keys == QUANTITY_KEYS:
            quantity = _as_quantity(v)
            if quantity is not None:
                return quantity
        elif keys == EPOCH_KEYS:
            epoch = _as_epoch(v)
            if epoch is not None:
                return epoch
        return v
    if isinstance(v, tuple):
        return tuple(coerce_domain_types(item) for item in v)
    if isinstance(v, Markdown) and v.front_matter is not None:
        # front matter stays a Map even if it happens to have a recognized shape
        front_matter = ValueMap((k, coerce_domain_types(child)) for k, child in v.front_matter.items())
        return Markdown(v.body, front_matter)
    return v


__all__ = ["coerce_domain_types"]
