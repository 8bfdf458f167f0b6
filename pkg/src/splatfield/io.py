"""File formats: the ``SPLF`` binary grid container, CSV and JSON helpers.

``SPLF`` layout (all little-endian)::

    4 bytes   magic b"SPLF"
    u32       format version (1)
    u32       d
    d x u32   per-axis resolution
    u32       C (channels)
    2d x f64  domain lower corner, then upper corner
    f64 * (prod(resolution) * C)   values, row-major over (*resolution, C)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .field import Domain, GridField

MAGIC = b"SPLF"
VERSION = 1


def fmt(x) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


def write_container(path, grid: GridField) -> None:
    d = len(grid.resolution)
    header = MAGIC + struct.pack("<I", VERSION) + struct.pack("<I", d)
    header += struct.pack(f"<{d}I", *grid.resolution)
    header += struct.pack("<I", grid.channels)
    header += struct.pack(f"<{2 * d}d", *grid.domain.lower, *grid.domain.upper)
    body = np.ascontiguousarray(grid.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_container(path) -> GridField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ParameterError(f"{path}: not an SPLF container")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise ParameterError(f"{path}: unsupported SPLF version {version}")
    (d,) = struct.unpack_from("<I", raw, 8)
    off = 12
    res = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    (channels,) = struct.unpack_from("<I", raw, off)
    off += 4
    bounds = struct.unpack_from(f"<{2 * d}d", raw, off)
    off += 16 * d
    count = int(np.prod(res)) * channels
    if len(raw) - off != 8 * count:
        raise ParameterError(f"{path}: payload size does not match header")
    vals = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(np.float64)
    domain = Domain(tuple(bounds[:d]), tuple(bounds[d:]))
    return GridField(domain, tuple(res), vals.reshape(*res, channels))


def write_matrix(path, matrix) -> None:
    """Dump a 2-D matrix as a single-channel container over the unit square."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ParameterError("write_matrix expects a 2-D array")
    write_container(path, GridField(Domain.unit(2), m.shape, m[:, :, None]))


def write_grid_csv(path, grid: GridField) -> None:
    d = len(grid.resolution)
    names = [f"x{i + 1}" for i in range(d)] + [f"c{j}" for j in range(grid.channels)]
    nodes = grid.nodes()
    vals = grid.flat()
    lines = [",".join(names)]
    for p, v in zip(nodes, vals):
        lines.append(",".join(fmt(t) for t in (*p, *v)))
    _write_text(path, "\n".join(lines) + "\n")


def write_table_csv(path, columns, rows, footer=()) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    lines.extend(f"# {line}" for line in footer)
    _write_text(path, "\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_json(path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
