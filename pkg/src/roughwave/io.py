"""Serialization: columnar binary snapshots, JSON reports and CSV tables.

Binary layout (all integers little-endian)::

    bytes 0..7    magic b"RWCOL01\\n"
    bytes 8..15   uint64 header length H
    next H bytes  UTF-8 JSON header (sorted keys)
    payload       columns as little-endian float64, C order, in header order

The header holds ``columns`` (list of {name, shape, offset, nbytes}, offsets
relative to the payload start) and free-form ``meta``.  A JSON sidecar
``<path>.json`` repeats the header for tools that do not read binary.
"""

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import SchemaMismatchError

MAGIC = b"RWCOL01\n"


def to_jsonable(obj):
    """Convert numpy scalars/arrays, tuples and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    return obj


def dumps(obj):
    """Deterministic JSON: sorted keys, fixed indentation, shortest float repr."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_columns(path, columns, meta=None):
    """Write float64 arrays ``columns`` (name -> array) to the binary format and sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries, blobs, offset = [], [], 0
    for name, arr in columns.items():
        a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": a.nbytes})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = {"format": "RWCOL01", "columns": entries, "meta": to_jsonable(meta or {})}
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        for b in blobs:
            fh.write(b)
    Path(str(path) + ".json").write_text(dumps(header), encoding="utf-8")
    return path


def read_columns(path):
    """Inverse of :func:`write_columns`: returns ``(columns, meta)``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not an RWCOL01 file")
        (hl,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hl).decode("utf-8"))
        payload = fh.read()
    cols = {}
    for e in header["columns"]:
        buf = payload[e["offset"]:e["offset"] + e["nbytes"]]
        cols[e["name"]] = np.frombuffer(buf, dtype="<f8").reshape(e["shape"]).copy()
    return cols, header["meta"]


def optical_field_columns(field):
    """Columns u, domega_u, b, N (plus t, x, omega) of an OpticalField."""
    cols = {"t": field.t, "x": field.x, "omega": field.omega, "u": field.u, "b": field.b, "N": field.N}
    if field.domega_u is not None:
        cols["domega_u"] = field.domega_u
    return cols


def field_sample_columns(sample):
    """Columns of a FieldSample; complex values are stored as separate re/im arrays."""
    return {
        "t": sample.t, "t_weights": sample.t_weights, "x": sample.x, "x_weights": sample.x_weights,
        "values_re": np.real(sample.values), "values_im": np.imag(sample.values),
    }


# CSV ----------------------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_cell(a) for a in np.ravel(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_csv(path, rows, columns):
    """Comma-separated UTF-8 with a header row; ``columns`` fixes order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def read_csv(path, required=()):
    """Rows as dicts of strings; SchemaMismatchError if a required column is missing or a row is ragged."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError("<header>", f"{path}: empty file") from None
        for c in required:
            if c not in header:
                raise SchemaMismatchError(c, f"{path}: missing column {c!r}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                col = header[min(len(rec), len(header) - 1)]
                raise SchemaMismatchError(col, f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            rows.append(dict(zip(header, rec)))
    return header, rows
