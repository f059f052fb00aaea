"""Delimited and JSON table I/O with a stable column order.

Cell encoding (delimited): ``None`` -> empty, booleans -> ``true``/``false``,
floats -> shortest round-trip ``repr``.  JSON keeps native types; non-finite
floats become ``null``.  Every file is UTF-8 and ends with a newline.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

FORMATS = ("csv", "json")


def _as_mapping(row) -> Mapping[str, Any]:
    if dataclasses.is_dataclass(row):
        return {f.name: getattr(row, f.name) for f in dataclasses.fields(row)}
    return row


def _plain(v):
    if isinstance(v, enum.Enum):
        return v.value
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()  # numpy scalar
    return v


def format_cell(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_cell(v):
    v = _plain(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def export_table(
    rows: Iterable,
    path,
    format: str = "csv",
    columns: Sequence[str] | None = None,
    delimiter: str = ",",
) -> Path:
    """Write ``rows`` (dataclasses or mappings) to ``path``.

    An empty table still gets a header when ``columns`` is given.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    rows = [_as_mapping(r) for r in rows]
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    columns = list(columns)
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([format_cell(r.get(c)) for c in columns])
    else:
        doc = {
            "columns": columns,
            "rows": [{c: _json_cell(r.get(c)) for c in columns} for r in rows],
        }
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def parse_bool(text: str) -> bool:
    if text in ("true", "True", "1"):
        return True
    if text in ("false", "False", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def optional(fn: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda text: None if text == "" else fn(text)


def read_table(
    path,
    format: str = "csv",
    types: Mapping[str, Callable[[str], Any]] | None = None,
    delimiter: str = ",",
) -> tuple[list[str], list[dict]]:
    """Read a table written by ``export_table``; returns ``(columns, rows)``.

    ``types`` converts delimited cells per column; JSON cells are native.
    """
    types = dict(types or {})
    path = Path(path)
    if format == "json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        return list(doc["columns"]), [dict(r) for r in doc["rows"]]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        columns = next(reader, [])
        rows = []
        for raw in reader:
            row = {}
            for c, cell in zip(columns, raw):
                conv = types.get(c)
                row[c] = conv(cell) if conv else cell
            rows.append(row)
    return columns, rows
