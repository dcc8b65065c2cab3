"""Feature and attribute ingestion, feature-map binaries and JSON reports.

EXPRMAP1 layout (little-endian)::

    bytes 0..7    b"EXPRMAP1"
    bytes 8..19   n, k, d as uint32
    bytes 20..    n*k*d*d float32, sample-major, then channel, then row-major

Arrays are stored as float32 and widened to float64 on load.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import os
import struct

import numpy as np

from .protocols import AttributeVector, FeatureMapStack

MAGIC = b"EXPRMAP1"
HEADER = struct.Struct("<8sIII")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _parse_float(cell: str) -> float:
    v = float(cell)
    if not math.isfinite(v):
        raise ValueError(cell)
    return v


def _is_numeric_row(row) -> bool:
    try:
        for c in row:
            float(c)
    except ValueError:
        return False
    return True


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = [(i + 1, [c.strip() for c in r]) for i, r in enumerate(csv.reader(fh))]
    # blank lines are skipped
    return [(ln, r) for ln, r in rows if r and any(r)]


def load_feature_csv(path) -> np.ndarray:
    """Rectangular numeric CSV; a non-numeric first row is taken as a header."""
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    if not _is_numeric_row(rows[0][1]):
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header row but no data")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise DataError(f"{path}: row at line {line} has {len(cells)} fields, expected {width}")
        for c, cell in enumerate(cells):
            try:
                out[r, c] = _parse_float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at line {line}, column {c + 1}"
                ) from None
    return out


def write_feature_csv(F, path, header: list[str] | None = None) -> None:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in F:
            w.writerow([repr(float(v)) for v in row])


def load_attributes_csv(path, column, kind: str | None = None) -> AttributeVector:
    """Read one attribute column, by header name or 0-based index.

    Integer-valued non-negative columns are inferred as ``discrete-label``
    unless ``kind`` is given.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    header = None
    if not _is_numeric_row(rows[0][1]):
        header = rows[0][1]
        rows = rows[1:]
    if isinstance(column, str) and not column.lstrip("-").isdigit():
        if header is None or column not in header:
            raise DataError(f"{path}: no column named {column!r}")
        col, name = header.index(column), column
    else:
        col = int(column)
        name = header[col] if header is not None and 0 <= col < len(header) else f"column{col}"
    values = []
    for line, cells in rows:
        if col < 0 or col >= len(cells):
            raise DataError(f"{path}: line {line} has no column {col}")
        try:
            values.append(_parse_float(cells[col]))
        except ValueError:
            raise DataError(
                f"{path}: non-numeric value {cells[col]!r} at line {line}, column {col + 1}"
            ) from None
    if not values:
        raise DataError(f"{path}: no data rows")
    v = np.array(values)
    if kind is None:
        discrete = np.all(v == np.round(v)) and np.all(v >= 0)
        kind = "discrete-label" if discrete else "continuous"
    try:
        return AttributeVector(v, kind=kind, name=name)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_feature_maps(data, path) -> None:
    data = np.asarray(data)
    if data.ndim != 4 or data.shape[2] != data.shape[3]:
        raise ValueError(f"feature maps must have shape (n, k, d, d), got {data.shape}")
    n, k, d, _ = data.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, n, k, d))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_feature_map_array(path) -> np.ndarray:
    """Raw float32 payload as an ``(n, k, d, d)`` array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) or blob[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not an EXPRMAP1 file")
    if len(blob) < HEADER.size:
        raise DataError(
            f"{path}: truncated header: expected {HEADER.size} bytes, got {len(blob)}"
        )
    _, n, k, d = HEADER.unpack_from(blob)
    expected = HEADER.size + 4 * n * k * d * d
    if len(blob) != expected:
        what = "truncated payload" if len(blob) < expected else "trailing bytes after payload"
        raise DataError(f"{path}: {what}: expected {expected} bytes, got {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=HEADER.size).reshape(n, k, d, d)


def load_feature_maps(path) -> FeatureMapStack:
    arr = read_feature_map_array(path)
    try:
        return FeatureMapStack(arr.astype(np.float64))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"cannot serialise non-finite value {v}")
        text = format(v, ".17g")
        if not any(ch in text for ch in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [f"{_encode(str(k))}: {_encode(v)}" for k, v in obj.items()]
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def build_report(command: str, config: dict, estimates=(), probes=(), extra: dict | None = None,
                 timestamp: str | None = None) -> dict:
    """Assemble one invocation's report.

    Results are keyed by attribute name; a probe report for the same attribute
    is nested under ``"probe"``. ``timestamp`` is the only non-deterministic
    field.
    """
    if timestamp is None:
        timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    results: dict[str, dict] = {}
    for est in estimates:
        results[est.attribute] = est.to_dict()
    for probe in probes:
        results.setdefault(probe.attribute, {"attribute": probe.attribute})["probe"] = probe.to_dict()
    report = {"command": command, "timestamp": timestamp, "config": config, "results": results}
    if extra:
        report.update(extra)
    return report


def dumps(report: dict) -> str:
    """JSON text with every real printed to 17 significant digits."""
    return _encode(report) + "\n"


def read_result_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_result_json(report: dict, path) -> None:
    text = dumps(report)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
