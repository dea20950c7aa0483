"""UHT tensor files.

Layout: magic b"UHT1" | dtype byte (0 = f32, 1 = f64) | rank byte |
rank little-endian u32 dims | payload, row-major little-endian scalars.
No compression, no alignment padding.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from ..errors import ShapeError

MAGIC = b"UHT1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def tensor_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype not in _CODES:
        raise ShapeError(f"UHT supports f32/f64 payloads, got dtype {arr.dtype}")
    if arr.ndim > 255:
        raise ShapeError(f"UHT rank limit is 255, got {arr.ndim}")
    head = MAGIC + struct.pack("<BB", _CODES[arr.dtype], arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
    return head + dims + payload


def write_tensor(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_bytes(arr))


def tensor_from_bytes(blob: bytes) -> np.ndarray:
    if blob[:4] != MAGIC:
        raise ShapeError(f"bad UHT magic {blob[:4]!r}")
    code, rank = struct.unpack_from("<BB", blob, 4)
    if code not in _DTYPES:
        raise ShapeError(f"unknown UHT dtype code {code}")
    dims = struct.unpack_from(f"<{rank}I", blob, 6)
    dtype = _DTYPES[code]
    offset = 6 + 4 * rank
    count = int(np.prod(dims)) if rank else 1
    expected = offset + count * dtype.itemsize
    if len(blob) != expected:
        raise ShapeError(f"UHT payload length {len(blob) - offset}, expected {expected - offset}")
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def read_tensor(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


def payload_digest(blob_or_path) -> str:
    """SHA-256 of the payload section only (dims/header excluded)."""
    blob = blob_or_path if isinstance(blob_or_path, bytes) else Path(blob_or_path).read_bytes()
    rank = blob[5]
    return hashlib.sha256(blob[6 + 4 * rank:]).hexdigest()
