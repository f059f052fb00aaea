import json
import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psfmarket.params import RegimeKind
from psfmarket.tables import export_table, format_cell, optional, parse_bool, read_table


@dataclass
class Row:
    name: str
    value: float | None
    flag: bool


def test_empty_table_is_header_only(tmp_path):
    path = export_table([], tmp_path / "e.csv", columns=["a", "b"])
    assert path.read_text() == "a,b\n"
    doc = json.loads(export_table([], tmp_path / "e.json", format="json", columns=["a"]).read_text())
    assert doc == {"columns": ["a"], "rows": []}


def test_dataclass_rows_round_trip(tmp_path):
    rows = [Row("x", 0.1, True), Row("y, z", None, False)]
    types = {"value": optional(float), "flag": parse_bool}
    for fmt in ("csv", "json"):
        path = export_table(rows, tmp_path / f"r.{fmt}", format=fmt)
        assert path.read_bytes().endswith(b"\n")
        cols, back = read_table(path, format=fmt, types=types)
        assert cols == ["name", "value", "flag"]
        assert [Row(**r) for r in back] == rows


def test_json_non_finite_becomes_null(tmp_path):
    path = export_table([{"v": math.inf}, {"v": math.nan}], tmp_path / "n.json", format="json")
    assert [r["v"] for r in json.loads(path.read_text())["rows"]] == [None, None]


def test_cell_encoding():
    assert format_cell(np.float64(0.25)) == "0.25"
    assert format_cell(np.int64(3)) == "3"
    assert format_cell(RegimeKind.GROWTH) == "Growth"
    assert format_cell(None) == ""


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        export_table([], tmp_path / "x", format="xml")


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        export_table([{"a": 1}], tmp_path / "missing" / "x.csv")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=20))
def test_floats_round_trip_exactly(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("t") / "f.csv"
    export_table([{"v": v} for v in values], path, columns=["v"])
    _, back = read_table(path, types={"v": float})
    assert [r["v"] for r in back] == values
