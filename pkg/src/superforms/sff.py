"""SFF1 form-field files.

Layout: one ASCII header line

    SFF1 n p q m_1 ... m_n lo_1 hi_1 ... lo_n hi_n boundary

then for each monomial key, in ascending (I-mask, J-mask) order, an ASCII line
``I-mask J-mask`` followed by the key's grid values as little-endian float64,
row-major and tightly packed.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .calculus import FormField, Grid
from .exterior import basis_position

MAGIC = "SFF1"


class SFFError(ValueError):
    pass


def dumps(F: FormField) -> bytes:
    g = F.grid
    head = [MAGIC, str(g.n), str(F.p), str(F.q)]
    head += [str(k) for k in g.m]
    for lo, hi in zip(g.lo, g.hi):
        head += [repr(float(lo)), repr(float(hi))]
    head.append(g.boundary)
    buf = io.BytesIO()
    buf.write((" ".join(head) + "\n").encode("ascii"))
    order = sorted(range(len(F.keys)), key=lambda s: F.keys[s])
    for s in order:
        I, J = F.keys[s]
        buf.write(f"{I} {J}\n".encode("ascii"))
        buf.write(np.ascontiguousarray(F.values[s], dtype="<f8").tobytes())
    return buf.getvalue()


def _line(buf: io.BytesIO) -> str:
    raw = buf.readline()
    if not raw.endswith(b"\n"):
        raise SFFError("truncated file: missing line terminator")
    return raw.decode("ascii").strip()


def loads(data: bytes) -> FormField:
    buf = io.BytesIO(data)
    try:
        head = _line(buf).split()
    except UnicodeDecodeError as exc:
        raise SFFError("header is not ASCII") from exc
    if not head or head[0] != MAGIC:
        raise SFFError("not an SFF1 file")
    try:
        n, p, q = (int(t) for t in head[1:4])
        m = tuple(int(t) for t in head[4:4 + n])
        bounds = [float(t) for t in head[4 + n:4 + 3 * n]]
        boundary = head[4 + 3 * n]
    except (ValueError, IndexError) as exc:
        raise SFFError(f"malformed header: {' '.join(head)}") from exc
    if len(head) != 5 + 3 * n:
        raise SFFError("header has extra fields")
    grid = Grid(tuple(bounds[0::2]), tuple(bounds[1::2]), m, boundary)
    pos = basis_position(n, p, q)
    values = np.zeros((len(pos),) + grid.shape)
    nbytes = 8 * grid.size
    prev = None
    for _ in range(len(pos)):
        try:
            I, J = (int(t) for t in _line(buf).split())
        except ValueError as exc:
            raise SFFError("malformed key line") from exc
        key = (I, J)
        if key not in pos:
            raise SFFError(f"key {key} is not a ({p}, {q}) monomial for n={n}")
        if prev is not None and key <= prev:
            raise SFFError("keys are not in ascending order")
        prev = key
        raw = buf.read(nbytes)
        if len(raw) != nbytes:
            raise SFFError(f"truncated data for key {key}")
        values[pos[key]] = np.frombuffer(raw, dtype="<f8").reshape(grid.shape)
    if buf.read(1):
        raise SFFError("trailing bytes after the last key")
    return FormField(grid, p, q, values)


def write(path, F: FormField) -> None:
    Path(path).write_bytes(dumps(F))


def read(path) -> FormField:
    return loads(Path(path).read_bytes())
