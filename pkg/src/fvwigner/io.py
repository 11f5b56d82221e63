"""On-disk formats: GridFileV1 phase-space snapshots, CSV time series, JSON manifests.

GridFileV1 layout (little-endian)::

    b"FVWG" | u32 version=1 | u32 n_p | u32 n_q | f64 p_extent | f64 q_extent
    | 4 blocks of n_p*n_q complex samples as (f64 re, f64 im), row-major,
      in the order W_+^+, W_-^-, W_+^-, W_-^+
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .free_particle import WignerComponents
from .kernel.grid import PhaseField, make_grid

MAGIC = b"FVWG"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")
_SAMPLE = np.dtype("<c16")


class GridFileError(ValueError):
    pass


def write_grid_file(path, W: WignerComponents) -> Path:
    path = Path(path)
    g = W.grid
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, g.n_p, g.n_q, g.p_extent, g.q_extent))
        for f in W.to_direct().fields():
            fh.write(np.ascontiguousarray(f.values, dtype=_SAMPLE).tobytes(order="C"))
    return path


def read_grid_file(path) -> WignerComponents:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise GridFileError("file shorter than the GridFileV1 header")
    magic, version, n_p, n_q, p_ext, q_ext = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise GridFileError(f"unsupported version {version}")
    block = n_p * n_q * _SAMPLE.itemsize
    if len(data) != _HEADER.size + 4 * block:
        raise GridFileError(f"payload is {len(data) - _HEADER.size} bytes, "
                            f"expected {4 * block}")
    grid = make_grid(n_p, n_q, p_ext, q_ext)
    fields = []
    for i in range(4):
        start = _HEADER.size + i * block
        vals = np.frombuffer(data, dtype=_SAMPLE, count=n_p * n_q, offset=start)
        fields.append(PhaseField(grid, vals.reshape(n_p, n_q).astype(complex)))
    return WignerComponents(*fields)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns: dict[str, np.ndarray]) -> Path:
    """Columns of equal length; floats written with ``repr`` for exact round trips."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    length = {len(c) for c in cols}
    if len(length) != 1:
        raise ValueError("CSV columns must have equal length")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    body = np.array(rows[1:], dtype=float).reshape(-1, len(names))
    return {n: body[:, i] for i, n in enumerate(names)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return path
