"""Value model, schemas, and coercion of raw JSON records into typed records."""

from __future__ import annotations

import datetime as dt
import math
import re
from typing import Any, Mapping

VALUE_TYPES = ("text", "integer", "decimal", "date")

# Python representation: str | int | float | datetime.date | None
Value = Any
Record = dict[str, Value]
Schema = dict[str, str]

_ISO_DATE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_DMY_DATE = re.compile(r"^(\d{2})-(\d{2})-(\d{4})$")


class CoercionError(ValueError):
    pass


def parse_date(text: str) -> dt.date:
    """Accepts ``YYYY-MM-DD`` and ``DD-MM-YYYY``."""
    m = _ISO_DATE.match(text)
    if m:
        y, mo, d = m.groups()
    else:
        m = _DMY_DATE.match(text)
        if not m:
            raise CoercionError(f"unrecognised date {text!r}")
        d, mo, y = m.groups()
    try:
        return dt.date(int(y), int(mo), int(d))
    except ValueError as exc:
        raise CoercionError(f"invalid date {text!r}: {exc}") from None


def coerce_value(raw: Any, vtype: str) -> Value:
    if raw is None:
        return None
    if vtype == "text":
        if isinstance(raw, str):
            return raw
    elif vtype == "integer":
        if isinstance(raw, bool):
            pass
        elif isinstance(raw, int):
            return raw
        elif isinstance(raw, float) and math.isfinite(raw) and raw.is_integer():
            return int(raw)
    elif vtype == "decimal":
        if isinstance(raw, (int, float)) and not isinstance(raw, bool) and math.isfinite(raw):
            return raw
    elif vtype == "date":
        if isinstance(raw, dt.date):
            return raw
        if isinstance(raw, str):
            return parse_date(raw)
    else:
        raise CoercionError(f"unknown value type {vtype!r}")
    raise CoercionError(f"value {raw!r} is not a valid {vtype}")


def coerce_record(raw: Mapping[str, Any], schema: Schema) -> Record:
    """Typed copy of ``raw``; unknown variables or bad values raise :class:`CoercionError`."""
    out: Record = {}
    for name, value in raw.items():
        if not name:
            raise CoercionError("empty variable name")
        if name not in schema:
            raise CoercionError(f"unknown variable {name!r}")
        out[name] = coerce_value(value, schema[name])
    return out


def to_json_value(value: Value) -> Any:
    if isinstance(value, dt.date):
        return value.isoformat()
    return value


def to_json_record(record: Mapping[str, Value]) -> dict[str, Any]:
    return {k: to_json_value(v) for k, v in record.items()}


def validate_schema(schema: Mapping[str, Any]) -> Schema:
    out: Schema = {}
    for name, vtype in schema.items():
        if not isinstance(name, str) or not name:
            raise ValueError(f"bad variable name {name!r}")
        if vtype not in VALUE_TYPES:
            raise ValueError(f"variable {name!r} has unknown type {vtype!r}")
        out[name] = vtype
    return out
