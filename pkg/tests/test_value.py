import json
import random
from datetime import date

import pytest

from datamodel.records import KeyPath
from datamodel.serialize import canonical_serialize, dumps_tagged, to_tagged_json
from datamodel.timescales import Epoch, TimeScale
from datamodel.units import Quantity, parse_unit
from datamodel.value import (Column, ColumnType, Markdown, Table, ValueKind, ValueMap, descend, kind_of,
                             render_text, table_from_cells, to_value)
from utils.errors import InvalidKeySegment, InvalidValue


def sample_table() -> Table:
    return Table(
        (Column("name", ColumnType.TEXT), Column("power", ColumnType.FLOAT, nullable=True)),
        (("avionics", 45.5), ("heater", None)),
    )


def test_kind_of_every_variant():
    kinds = {
        None: ValueKind.NULL, True: ValueKind.BOOL, 3: ValueKind.INT, 2.5: ValueKind.FLOAT,
        "x": ValueKind.TEXT, b"\x00": ValueKind.BYTES,
    }
    for value, kind in kinds.items():
        assert kind_of(value) == kind
    assert kind_of(Quantity(1, parse_unit("m"))) == ValueKind.QUANTITY
    assert kind_of(Epoch(TimeScale.UTC, 0)) == ValueKind.EPOCH
    assert kind_of(sample_table()) == ValueKind.TABLE
    assert kind_of(Markdown("body")) == ValueKind.MARKDOWN
    assert kind_of((1, 2)) == ValueKind.SEQUENCE
    assert kind_of(ValueMap({"a": 1})) == ValueKind.MAP
    with pytest.raises(InvalidValue):
        kind_of(object())


def test_to_value_normalizes_native_data():
    value = to_value({"a": [1, 2.0, {"b": None}], "when": date(2000, 1, 2), "raw": bytearray(b"hi")})
    assert isinstance(value, ValueMap)
    assert value["a"] == (1, 2.0, ValueMap({"b": None}))
    assert value["when"] == Epoch(TimeScale.UTC, 0.5)
    assert value["raw"] == b"hi"


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), 2 ** 63, {"a.b": 1}])
def test_to_value_rejects(bad):
    with pytest.raises(InvalidValue):
        to_value(bad)


def test_value_map_is_immutable_and_ordered():
    m = ValueMap([("z", 1), ("a", 2)])
    assert list(m) == ["z", "a"]
    with pytest.raises(AttributeError):
        m.extra = 1
    with pytest.raises(InvalidValue):
        ValueMap([("a", 1), ("a", 2)])


def test_table_validates_cells():
    with pytest.raises(InvalidValue):
        Table((Column("n", ColumnType.INT),), (("one",),))
    with pytest.raises(InvalidValue):
        Table((Column("n", ColumnType.INT),), ((None,),))
    with pytest.raises(InvalidValue):
        Table((Column("n", ColumnType.INT), Column("n", ColumnType.INT)), ())


def test_table_from_cells_widens_numbers():
    table = table_from_cells(["n"], [[1], [2.5], [None]])
    assert table.columns[0] == Column("n", ColumnType.FLOAT, True)
    assert table.column("n") == (1.0, 2.5, None)


def test_descend_through_containers():
    table = sample_table()
    assert descend(table, "name") == ("avionics", "heater")
    assert descend(table, "rows")[0] == ValueMap({"name": "avionics", "power": 45.5})
    assert descend((10, 20, 30), "-1") == 30
    doc = Markdown("text", ValueMap({"title": "Intro"}))
    assert descend(doc, "title") == "Intro"
    assert descend(doc, "body") == "text"
    with pytest.raises(KeyError):
        descend((1,), "5")


def test_column_named_rows_wins_over_row_axis():
    table = Table((Column("rows", ColumnType.INT),), ((1,), (2,)))
    assert descend(table, "rows") == (1, 2)


def test_render_text():
    assert render_text(None) == ""
    assert render_text(True) == "true"
    assert render_text(0.1) == "0.1"
    assert render_text((1, "a")) == "[1, a]"
    assert render_text(Epoch(TimeScale.TDB, 0.0)) == "2000-01-01T12:00:00.000 TDB"
    assert sample_table().to_markdown().splitlines()[2] == "| avionics | 45.5 |"


def test_canonical_bytes_ignore_map_order():
    a = ValueMap([("x", 1), ("y", (1.5, "t"))])
    b = ValueMap([("y", (1.5, "t")), ("x", 1)])
    assert canonical_serialize(a) == canonical_serialize(b)


def test_canonical_bytes_distinguish_variants():
    assert canonical_serialize(1) != canonical_serialize(1.0)
    assert canonical_serialize("1") != canonical_serialize(1)
    metres = Quantity(1000, parse_unit("m"))
    assert canonical_serialize(metres) != canonical_serialize(metres.to("km"))
    assert canonical_serialize(Epoch(TimeScale.UTC, 0)) != canonical_serialize(Epoch(TimeScale.TDB, 0))


def test_tagged_json_names_variants():
    tagged = to_tagged_json(ValueMap({"thrust": Quantity(440, parse_unit("N")), "flags": (True, None)}))
    assert tagged["type"] == "Map"
    assert tagged["value"]["thrust"] == {"type": "Quantity", "value": {"magnitude": 440.0, "unit": "N"}}
    assert tagged["value"]["flags"]["value"][1] == {"type": "Null", "value": None}
    text = dumps_tagged(tagged)
    assert text.endswith("\n")
    assert json.loads(text) == tagged


def test_key_paths():
    key = KeyPath.parse("propulsion.engine.thrust")
    assert str(key) == "propulsion.engine.thrust"
    assert key.startswith(KeyPath.of("propulsion"))
    assert [str(p) for p in key.prefixes()] == ["propulsion.engine.thrust", "propulsion.engine", "propulsion"]
    with pytest.raises(InvalidKeySegment):
        KeyPath.parse("a..b")


def random_value(rng: random.Random, depth: int = 0):
    texts = ["", "a", "b", "ab", "1", "N"]
    leaves = [
        lambda: None,
        lambda: rng.choice([True, False]),
        lambda: rng.randint(-2, 2),
        lambda: rng.choice([0.0, -0.0, 0.5, 1.0, 2.0, 1e-7]),
        lambda: rng.choice(texts),
        lambda: rng.choice([b"", b"a", b"\x00"]),
        lambda: Quantity(rng.choice([1, 1.5]), parse_unit(rng.choice(["m", "km", "N", "kg*m/s^2"]))),
        lambda: Epoch(rng.choice([TimeScale.UTC, TimeScale.TDB]), rng.choice([0.0, 0.5, 1])),
    ]
    if depth >= 2 or rng.random() < 0.5:
        return rng.choice(leaves)()
    roll = rng.random()
    if roll < 0.35:
        return tuple(random_value(rng, depth + 1) for _ in range(rng.randint(0, 3)))
    if roll < 0.7:
        keys = rng.sample(["a", "b", "c"], rng.randint(0, 3))
        return ValueMap((key, random_value(rng, depth + 1)) for key in keys)
    if roll < 0.85:
        front_matter = rng.choice([None, ValueMap({"title": rng.choice(texts)})])
        return Markdown(rng.choice(texts), front_matter)
    nullable = rng.random() < 0.5
    columns = (Column("n", ColumnType.INT, nullable), Column("t", ColumnType.TEXT))
    rows = [(rng.choice([1, 2, None] if nullable else [1, 2]), rng.choice(texts)) for _ in range(rng.randint(0, 2))]
    return Table(columns[:rng.randint(1, 2)] if not rows else columns, rows)


def test_canonical_bytes_are_injective_over_random_values():
    rng = random.Random(1234)
    by_bytes, by_structure = {}, {}
    for _ in range(3000):
        value = random_value(rng)
        encoded = canonical_serialize(value)
        structure = dumps_tagged(to_tagged_json(value))
        assert by_bytes.setdefault(encoded, structure) == structure
        assert by_structure.setdefault(structure, encoded) == encoded
    # the corpus must revisit values for equal-gives-equal to be exercised
    assert len(by_bytes) < 3000
