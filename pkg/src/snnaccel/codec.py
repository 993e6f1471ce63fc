"""Sparse spike-event encoding for inter-layer transfers.

A frame is reduced to one event per pixel that carries at least one spike.
Every event packs the row address, column address, and the channel mask
into ceil(log2 H) + ceil(log2 W) + C bits, most-significant field first.
The concatenated events form a single bitstream packed little-endian
(stream bit i lands in byte i // 8 at bit position i % 8); the serialized
container prepends a fixed header.

Container layout (all integers little-endian):
    magic "STIE" | u8 version=1 | u16 H | u16 W | u16 C | u32 event count
    | packed bitstream, zero padded to a byte boundary
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import SpikeFrame

MAGIC = b"STIE"
VERSION = 1
_HEADER = struct.Struct("<4sBHHHI")


class CorruptStreamError(ValueError):
    """The byte stream violates the event-stream format."""


def _addr_bits(n: int) -> int:
    # ceil(log2 n) with the convention ceil(log2 1) == 0
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return (n - 1).bit_length()


def event_width(height: int, width: int, channels: int) -> int:
    """Bits per encoded event for a frame of the given dimensions."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    return _addr_bits(height) + _addr_bits(width) + channels


@dataclass(frozen=True)
class SpikeEvent:
    y: int
    x: int
    mask: np.ndarray  # (C,) uint8, at least one bit set


@dataclass(frozen=True)
class EventStream:
    height: int
    width: int
    channels: int
    count: int
    payload: bytes

    @property
    def event_bits(self) -> int:
        return event_width(self.height, self.width, self.channels)

    @property
    def payload_bits(self) -> int:
        return self.count * self.event_bits

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(MAGIC, VERSION, self.height, self.width,
                              self.channels, self.count)
        return header + self.payload

    @classmethod
    def from_bytes(cls, raw: bytes) -> "EventStream":
        if len(raw) < _HEADER.size:
            raise CorruptStreamError("stream shorter than header")
        magic, version, h, w, c, count = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise CorruptStreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported version {version}")
        if h < 1 or w < 1 or c < 1:
            raise CorruptStreamError("degenerate frame dimensions in header")
        payload = raw[_HEADER.size:]
        need = (count * event_width(h, w, c) + 7) // 8
        if len(payload) < need:
            raise CorruptStreamError(
                f"payload truncated: {len(payload)} bytes, need {need}")
        return cls(h, w, c, count, payload[:need])


def _field_bits(value: int, width: int) -> list:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def encode_events(frame: SpikeFrame) -> EventStream:
    """Encode all nonzero pixels of a frame in raster order."""
    h, w, c = frame.data.shape
    yb, xb = _addr_bits(h), _addr_bits(w)
    nz = frame.data.any(axis=2)
    bits: list = []
    count = 0
    for y, x in zip(*np.nonzero(nz)):
        bits.extend(_field_bits(int(y), yb))
        bits.extend(_field_bits(int(x), xb))
        bits.extend(int(b) for b in frame.data[y, x])
        count += 1
    if bits:
        payload = np.packbits(np.array(bits, dtype=np.uint8),
                              bitorder="little").tobytes()
    else:
        payload = b""
    return EventStream(h, w, c, count, payload)


def decode_events(stream: EventStream) -> SpikeFrame:
    """Rebuild the dense frame; exact inverse of encode_events."""
    h, w, c = stream.height, stream.width, stream.channels
    yb, xb = _addr_bits(h), _addr_bits(w)
    ew = yb + xb + c
    need = (stream.count * ew + 7) // 8
    if len(stream.payload) < need:
        raise CorruptStreamError(
            f"payload truncated: {len(stream.payload)} bytes, need {need}")
    bits = np.unpackbits(np.frombuffer(stream.payload, dtype=np.uint8),
                         bitorder="little")

    data = np.zeros((h, w, c), dtype=np.uint8)
    prev = -1
    pos = 0
    for _ in range(stream.count):
        chunk = bits[pos:pos + ew]
        pos += ew
        y = 0
        for b in chunk[:yb]:
            y = (y << 1) | int(b)
        x = 0
        for b in chunk[yb:yb + xb]:
            x = (x << 1) | int(b)
        mask = chunk[yb + xb:ew]
        if y >= h or x >= w:
            raise CorruptStreamError(f"event address ({y}, {x}) out of range")
        if not mask.any():
            raise CorruptStreamError(f"event at ({y}, {x}) has an empty mask")
        raster = y * w + x
        if raster <= prev:
            raise CorruptStreamError(
                f"event at ({y}, {x}) breaks raster order")
        prev = raster
        data[y, x] = mask
    return SpikeFrame(data)


def compression_ratio(frame: SpikeFrame) -> Fraction | None:
    """Dense bits over encoded payload bits; None for an all-zero frame."""
    h, w, c = frame.data.shape
    events = int(frame.data.any(axis=2).sum())
    if events == 0:
        return None
    return Fraction(h * w * c, events * event_width(h, w, c))
