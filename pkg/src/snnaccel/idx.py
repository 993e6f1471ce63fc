"""IDX file ingestion (the MNIST container format).

Headers are big-endian: a 4-byte magic whose last byte is the dimension
count (0x00000803 for u8 image tensors, 0x00000801 for u8 label vectors),
followed by one u32 per dimension, then the raw bytes.
"""
from __future__ import annotations

import struct

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    """Malformed or truncated IDX file."""


def _read_header(raw: bytes, path: str):
    if len(raw) < 4:
        raise IdxError(f"{path}: file shorter than magic")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic not in (IMAGES_MAGIC, LABELS_MAGIC):
        raise IdxError(f"{path}: bad magic 0x{magic:08x}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    return magic, dims, header_len


def load_idx(path: str) -> np.ndarray:
    """Load a u8 IDX tensor; raises IdxError rather than returning partial data."""
    with open(path, "rb") as fh:
        raw = fh.read()
    _, dims, header_len = _read_header(raw, path)
    count = int(np.prod(dims))
    body = raw[header_len:]
    if len(body) < count:
        raise IdxError(f"{path}: expected {count} bytes, found {len(body)}")
    return np.frombuffer(body[:count], dtype=np.uint8).reshape(dims).copy()


def save_idx(path: str, array: np.ndarray) -> None:
    """Write a u8 tensor as IDX (3-D arrays as images, 1-D as labels)."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    if arr.ndim == 3:
        magic = IMAGES_MAGIC
    elif arr.ndim == 1:
        magic = LABELS_MAGIC
    else:
        raise IdxError(f"unsupported rank {arr.ndim} for IDX export")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        for d in arr.shape:
            fh.write(struct.pack(">I", d))
        fh.write(arr.tobytes())
