"""Serialization of joints, filters and curves.

CSV output has a header row, ``,`` separators, LF line endings and floats
written with 12 significant digits, so files are stable under ``diff``.
JSON output is a single object ``{"meta": ..., "points": [...]}`` with sorted
keys; non-finite floats become ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from privguess.core import Channel, JointPmf
from privguess.errors import ValidationError
from privguess.scalar import TradeoffPoint

SCALAR_COLUMNS = ("epsilon", "utility", "regime", "filter_param")
ORACLE_COLUMNS = SCALAR_COLUMNS + ("source",)
VECTOR_COLUMNS = SCALAR_COLUMNS + ("n",)
MARKOV_COLUMNS = ("epsilon", "utility", "upper", "regime", "filter_param", "n")
GAUSSIAN_COLUMNS = ("epsilon", "sensr", "gamma_eps", "lower", "upper")


def fmt(value: Any) -> str:
    """One CSV cell: 12 significant digits for floats, empty for ``None``."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        out = f"{v:.12g}"
        return "0" if out == "-0" else out
    if hasattr(value, "value"):  # enums
        return str(value.value)
    return str(value)


def rows_to_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def point_row(pt: TradeoffPoint, **extra) -> dict[str, Any]:
    row = {
        "epsilon": pt.epsilon,
        "utility": pt.utility,
        "regime": pt.regime,
        "filter_param": pt.filter_param,
        "source": pt.source,
        "n": pt.n,
        "achieved": pt.achieved,
    }
    row.update(extra)
    return row


def _json_value(value: Any) -> Any:
    if isinstance(value, Channel):
        return _json_value(value.rows)
    if isinstance(value, np.ndarray):
        return [_json_value(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if hasattr(value, "value"):
        return value.value
    return value


def rows_to_json(meta: Mapping[str, Any], rows: Iterable[Mapping[str, Any]]) -> str:
    doc = {"meta": _json_value(dict(meta)), "points": [_json_value(dict(r)) for r in rows]}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


# -- joints and channels ----------------------------------------------------


def joint_to_csv(joint: JointPmf) -> str:
    rows = ({"x": x, "y": y, "p": float(joint.probs[x, y])}
            for x in range(joint.M) for y in range(joint.N))
    return rows_to_csv(("x", "y", "p"), rows)


def joint_from_csv(text: str) -> JointPmf:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"x", "y", "p"} <= set(reader.fieldnames):
        raise ValidationError("joint CSV needs columns x,y,p")
    entries = []
    try:
        for row in reader:
            entries.append((int(row["x"]), int(row["y"]), float(row["p"])))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad joint CSV row: {exc}") from None
    if not entries:
        raise ValidationError("joint CSV has no rows")
    if min(min(x, y) for x, y, _ in entries) < 0:
        raise ValidationError("joint CSV indices must be non-negative")
    M = max(x for x, _, _ in entries) + 1
    N = max(y for _, y, _ in entries) + 1
    table = np.zeros((M, N))
    for x, y, p in entries:
        table[x, y] += p
    return JointPmf(table)


def joint_to_json(joint: JointPmf) -> str:
    return json.dumps({"probs": joint.probs.tolist()}) + "\n"


def joint_from_json(text: str) -> JointPmf:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from None
    table = doc.get("probs") if isinstance(doc, dict) else doc
    if table is None:
        raise ValidationError("joint JSON must be a nested array or an object with 'probs'")
    return JointPmf(table)


def load_joint(path: str | Path) -> JointPmf:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read joint file {str(path)!r}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        return joint_from_json(text)
    return joint_from_csv(text)


def channel_to_json(channel: Channel) -> str:
    return json.dumps({"rows": channel.rows.tolist()}) + "\n"


def channel_from_json(text: str) -> Channel:
    doc = json.loads(text)
    return Channel(doc["rows"] if isinstance(doc, dict) else doc)
