import csv
import io
import json
import math
from enum import Enum
from typing import Any, Iterable

import numpy as np
from pydantic import BaseModel

from core.config import get_settings


def to_plain(value: Any) -> Any:
    """Convert models, enums and numpy scalars/arrays into plain JSON-able python values."""
    if isinstance(value, BaseModel):
        return to_plain(value.model_dump(mode="python"))
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_plain(item) for item in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def format_float(value: float, digits: int | None = None) -> str:
    """Fixed-significance float text; non-finite values become quoted JSON strings."""
    if math.isnan(value):
        return '"NaN"'
    if math.isinf(value):
        return '"Infinity"' if value > 0 else '"-Infinity"'
    digits = digits or get_settings().report_settings.SIGNIFICANT_DIGITS
    text = format(value, f".{digits}g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def dumps_json(value: Any, digits: int | None = None, indent: int = 2) -> str:
    """
    Serialize a report fragment to JSON with every float written to a fixed
    number of significant digits. Parsing the output and dumping it again
    yields the same bytes.
    """
    return _encode(to_plain(value), digits, indent, 0) + "\n"


def _encode(value: Any, digits: int | None, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    closing = " " * (indent * level)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value, digits)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(key)}: {_encode(item, digits, indent, level + 1)}" for key, item in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + closing + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [f"{pad}{_encode(item, digits, indent, level + 1)}" for item in value]
        return "[\n" + ",\n".join(items) + "\n" + closing + "]"
    raise TypeError(f"Cannot serialize value of type {type(value).__name__}")


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-finite number {name} is not accepted")


def loads_strict(text: str) -> Any:
    """json.loads that refuses NaN and Infinity literals."""
    return json.loads(text, parse_constant=_reject_constant)


def flatten(value: Any, prefix: str = "") -> list[tuple[str, Any]]:
    """Dotted-path (key, value) pairs for nested report fragments."""
    value = to_plain(value)
    if isinstance(value, dict):
        pairs: list[tuple[str, Any]] = []
        for key, item in value.items():
            pairs.extend(flatten(item, f"{prefix}.{key}" if prefix else key))
        return pairs
    if isinstance(value, list):
        pairs = []
        for index, item in enumerate(value):
            pairs.extend(flatten(item, f"{prefix}.{index}" if prefix else str(index)))
        return pairs
    return [(prefix, value)]


def _cell(value: Any, digits: int | None) -> str:
    if isinstance(value, float):
        return format_float(value, digits).strip('"')
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dumps_csv(rows: Iterable[dict[str, Any]], digits: int | None = None) -> str:
    rows = [to_plain(row) for row in rows]
    if not rows:
        return ""
    columns = list(rows[0].keys())
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column), digits) for column in columns])
    return buffer.getvalue()


def dumps_table(rows: Iterable[dict[str, Any]], digits: int = 10) -> str:
    rows = [to_plain(row) for row in rows]
    if not rows:
        return ""
    columns = list(rows[0].keys())
    cells = [[_cell(row.get(column), digits) for column in columns] for row in rows]
    widths = [max(len(column), *(len(line[k]) for line in cells)) for k, column in enumerate(columns)]
    lines = ["  ".join(column.ljust(widths[k]) for k, column in enumerate(columns))]
    lines.append("  ".join("-" * width for width in widths))
    lines.extend("  ".join(line[k].ljust(widths[k]) for k in range(len(columns))) for line in cells)
    return "\n".join(lines) + "\n"
