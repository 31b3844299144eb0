"""Binary field container: magic 'HMAF', explicit little-endian layout.

Header: magic (4 bytes), format version (u32), complex dimension n (u32),
axis count (u32), per-axis sizes (u32 each), payload kind (u32).  Payload
is float64 little-endian in row-major axis order: real scalars store one
value per point, complex scalars two (re, im), Hermitian matrix fields
n^2 complex entries per point, row-major, real before imaginary.
Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .calculus import HermitianField
from .grid import ComplexField, ScalarField, TorusGrid

__all__ = [
    "FieldFileError",
    "KIND_REAL_SCALAR",
    "KIND_COMPLEX_SCALAR",
    "KIND_HERMITIAN",
    "write_field",
    "read_field",
]

MAGIC = b"HMAF"
VERSION = 1
KIND_REAL_SCALAR = 0
KIND_COMPLEX_SCALAR = 1
KIND_HERMITIAN = 2

_HEADER_HEAD = struct.Struct("<4sIII")


class FieldFileError(IOError):
    pass


def _interleave(values: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(values).ravel()
    out = np.empty(2 * flat.size, dtype="<f8")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out


def write_field(path, field) -> None:
    """Serialize a ScalarField, ComplexField, or HermitianField."""
    grid = field.grid
    if isinstance(field, ScalarField):
        kind = KIND_REAL_SCALAR
        payload = np.ascontiguousarray(field.values, dtype="<f8").ravel()
    elif isinstance(field, ComplexField):
        kind = KIND_COMPLEX_SCALAR
        payload = _interleave(field.values)
    elif isinstance(field, HermitianField):
        kind = KIND_HERMITIAN
        payload = _interleave(field.values)
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")

    naxes = len(grid.sizes)
    header = (_HEADER_HEAD.pack(MAGIC, VERSION, grid.n, naxes)
              + struct.pack(f"<{naxes}I", *grid.sizes)
              + struct.pack("<I", kind))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_field(path):
    """Read a field file back; the grid is reconstructed from the header."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_HEAD.size:
        raise FieldFileError(f"{path}: truncated header")
    magic, version, n, naxes = _HEADER_HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FieldFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FieldFileError(f"{path}: unsupported version {version}")
    offset = _HEADER_HEAD.size
    need = offset + 4 * naxes + 4
    if len(raw) < need:
        raise FieldFileError(f"{path}: truncated header")
    sizes = struct.unpack_from(f"<{naxes}I", raw, offset)
    offset += 4 * naxes
    (kind,) = struct.unpack_from("<I", raw, offset)
    offset += 4

    grid = TorusGrid(n, tuple(sizes))
    points = grid.point_count
    if kind == KIND_REAL_SCALAR:
        count = points
    elif kind == KIND_COMPLEX_SCALAR:
        count = 2 * points
    elif kind == KIND_HERMITIAN:
        count = 2 * points * n * n
    else:
        raise FieldFileError(f"{path}: unknown payload kind {kind}")
    payload = np.frombuffer(raw, dtype="<f8", count=-1, offset=offset)
    if payload.size != count:
        raise FieldFileError(
            f"{path}: payload length {payload.size} does not match header ({count})")

    if kind == KIND_REAL_SCALAR:
        return ScalarField(grid, payload.reshape(grid.sizes).copy())
    complex_vals = payload[0::2] + 1j * payload[1::2]
    if kind == KIND_COMPLEX_SCALAR:
        return ComplexField(grid, complex_vals.reshape(grid.sizes))
    return HermitianField(grid, complex_vals.reshape(grid.sizes + (n, n)))
