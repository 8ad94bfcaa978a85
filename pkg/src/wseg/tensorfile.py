"""Binary tensor container used for every array written to disk.

Layout: magic bytes ``WST1``, unsigned 32-bit little-endian rank, ``rank``
dims (u32 LE), then IEEE-754 32-bit little-endian values in row-major order.
Readers reject wrong magic, truncated payloads, and trailing garbage.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

MAGIC = b"WST1"
_MAX_RANK = 32


class TensorFormatError(ValueError):
    """File does not conform to the WST1 container layout."""


def write_tensor(path, array) -> None:
    arr = np.asarray(array, dtype="<f4")
    dims = np.asarray(arr.shape, dtype="<u4")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(arr.ndim).astype("<u4").tobytes())
        fh.write(dims.tobytes())
        fh.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a WST1 file into a float32 array (row-major)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    name = os.fspath(path)
    if len(blob) < len(MAGIC) + 4:
        raise TensorFormatError(f"{name}: truncated header")
    if blob[:4] != MAGIC:
        raise TensorFormatError(f"{name}: bad magic {blob[:4]!r}")
    rank = int(np.frombuffer(blob, dtype="<u4", count=1, offset=4)[0])
    if rank > _MAX_RANK:
        raise TensorFormatError(f"{name}: implausible rank {rank}")
    head = 8 + 4 * rank
    if len(blob) < head:
        raise TensorFormatError(f"{name}: truncated dims")
    dims = np.frombuffer(blob, dtype="<u4", count=rank, offset=8).astype(np.int64)
    count = int(np.prod(dims)) if rank else 1
    expected = head + 4 * count
    if len(blob) != expected:
        raise TensorFormatError(
            f"{name}: payload is {len(blob) - head} bytes, expected {4 * count}"
        )
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=head)
    return values.reshape(dims).copy()
