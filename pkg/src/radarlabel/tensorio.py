"""Canonical binary tensor container.

Layout: a fixed 64-byte little-endian header followed by the raw values.

    offset  size  field
    0       8     magic b"RLTENSOR"
    8       2     format version (currently 1)
    10      2     dtype code (see _DTYPE_CODES)
    12      1     order flag: 1 = row-major (C), 0 = column-major
    13      1     reserved (0)
    14      2     rank, 1..6
    16      48    dims, 6 x uint64 (unused trailing dims are 0)

The payload must hold exactly prod(dims) values of the coded dtype.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RLTENSOR"
VERSION = 1
MAX_RANK = 6
HEADER_SIZE = 64
_HEADER_FMT = "<8sHHBBH6Q"

_DTYPE_CODES = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<i1"),
    4: np.dtype("<i2"),
    5: np.dtype("<i4"),
    6: np.dtype("<i8"),
    7: np.dtype("<u1"),
    8: np.dtype("<u2"),
    9: np.dtype("<u4"),
    10: np.dtype("<u8"),
}
_CODE_FOR_KIND = {dt.str: code for code, dt in _DTYPE_CODES.items()}


class MalformedTensorError(ValueError):
    """Tensor file or tensor contents violate the format contract."""


def write_tensor(arr: np.ndarray, path: str | Path) -> None:
    """Write an array in the canonical container (always row-major)."""
    arr = np.ascontiguousarray(arr)
    key = arr.dtype.newbyteorder("<").str
    if key not in _CODE_FOR_KIND:
        raise MalformedTensorError(f"unsupported dtype {arr.dtype}")
    if not 1 <= arr.ndim <= MAX_RANK:
        raise MalformedTensorError(f"rank must be 1..{MAX_RANK}, got {arr.ndim}")
    dims = list(arr.shape) + [0] * (MAX_RANK - arr.ndim)
    header = struct.pack(_HEADER_FMT, MAGIC, VERSION, _CODE_FOR_KIND[key],
                         1, 0, arr.ndim, *dims)
    assert len(header) == HEADER_SIZE
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a canonical tensor file, validating magic, dims, and payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise MalformedTensorError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, dtype_code, order, _, rank, *dims = struct.unpack(
        _HEADER_FMT, raw[:HEADER_SIZE])
    if magic != MAGIC:
        raise MalformedTensorError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MalformedTensorError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise MalformedTensorError(f"{path}: unknown dtype code {dtype_code}")
    if order not in (0, 1):
        raise MalformedTensorError(f"{path}: bad order flag {order}")
    if not 1 <= rank <= MAX_RANK:
        raise MalformedTensorError(f"{path}: bad rank {rank}")
    shape = tuple(dims[:rank])
    if any(d for d in dims[rank:]):
        raise MalformedTensorError(f"{path}: nonzero dims beyond rank {rank}")
    dtype = _DTYPE_CODES[dtype_code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = raw[HEADER_SIZE:]
    if len(payload) != expected:
        raise MalformedTensorError(
            f"{path}: payload is {len(payload)} bytes, dims {shape} require {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape, order="C" if order else "F")
    return np.ascontiguousarray(arr)
