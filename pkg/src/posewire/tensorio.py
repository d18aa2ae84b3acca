"""Bit-exact `.hmoseq` sequence files: recorded heatmap + offset volumes.

Layout on disk, all little-endian:

  bytes 0-3    magic ``HMOS``
  byte  4      version (1)
  bytes 5-7    reserved, zero
  bytes 8-11   frame_count  (u32)
  bytes 12-15  joint_count  (u32, 24)
  bytes 16-19  grid_side    (u32, 28)
  bytes 20-23  depth_bins   (u32, 28)
  bytes 24-27  input_side   (u32, 448)
  bytes 28-31  reserved, zero

followed by ``frame_count`` frames, each the 672x28x28 heatmap volume then
the 2016x28x28 offset volume as IEEE-754 32-bit values, channel index
varying slowest, then row (y), then column (x).

Readers stream one frame at a time and reject non-finite values rather than
letting them poison downstream argmax.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence

import numpy as np

from .skeleton import GEOMETRY, JOINT_COUNT

MAGIC = b"HMOS"
VERSION = 1

GRID_SIDE = GEOMETRY.grid_side
DEPTH_BINS = GEOMETRY.depth_bins
HEATMAP_CHANNELS = JOINT_COUNT * DEPTH_BINS  # 672
OFFSET_CHANNELS = 3 * HEATMAP_CHANNELS  # 2016
HEATMAP_SHAPE = (HEATMAP_CHANNELS, GRID_SIDE, GRID_SIDE)
OFFSET_SHAPE = (OFFSET_CHANNELS, GRID_SIDE, GRID_SIDE)

_HEADER = struct.Struct("<4sB3xIIIII4x")
HEADER_SIZE = _HEADER.size  # 32

_CELLS = GRID_SIDE * GRID_SIDE
HEATMAP_BYTES = HEATMAP_CHANNELS * _CELLS * 4
OFFSET_BYTES = OFFSET_CHANNELS * _CELLS * 4
FRAME_BYTES = HEATMAP_BYTES + OFFSET_BYTES  # 8_429_568


class SequenceFormatError(Exception):
    """Base class for malformed `.hmoseq` input."""


class BadMagicError(SequenceFormatError):
    pass


class UnsupportedVersionError(SequenceFormatError):
    pass


class ShapeMismatchError(SequenceFormatError):
    pass


class TruncatedFrameError(SequenceFormatError):
    def __init__(self, frame_index: int, detail: str = "") -> None:
        self.frame_index = frame_index
        msg = f"sequence truncated at frame {frame_index}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class NonFiniteValueError(SequenceFormatError):
    def __init__(self, frame_index: int, volume: str, channel: int, row: int, col: int) -> None:
        self.frame_index = frame_index
        self.volume = volume
        self.channel = channel
        self.cell = (row, col)
        super().__init__(
            f"non-finite value in frame {frame_index} {volume} "
            f"channel {channel} cell ({row}, {col})"
        )


@dataclass
class TensorFrame:
    """One inference output: heatmap volume plus offset volume, float32."""

    heatmap: np.ndarray
    offsets: np.ndarray
    frame_index: int = 0

    def __post_init__(self) -> None:
        self.heatmap = np.ascontiguousarray(self.heatmap, dtype=np.float32)
        self.offsets = np.ascontiguousarray(self.offsets, dtype=np.float32)
        if self.heatmap.shape != HEATMAP_SHAPE:
            raise ValueError(f"heatmap shape {self.heatmap.shape}, expected {HEATMAP_SHAPE}")
        if self.offsets.shape != OFFSET_SHAPE:
            raise ValueError(f"offsets shape {self.offsets.shape}, expected {OFFSET_SHAPE}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")


@dataclass(frozen=True)
class SequenceHeader:
    frame_count: int
    joint_count: int = JOINT_COUNT
    grid_side: int = GRID_SIDE
    depth_bins: int = DEPTH_BINS
    input_side: int = GEOMETRY.input_side

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC,
            VERSION,
            self.frame_count,
            self.joint_count,
            self.grid_side,
            self.depth_bins,
            self.input_side,
        )


def write_sequence(frames: Sequence[TensorFrame], sink: BinaryIO) -> int:
    """Write header then frames in order; returns total bytes written."""
    header = SequenceHeader(frame_count=len(frames))
    sink.write(header.pack())
    written = HEADER_SIZE
    for frame in frames:
        data = frame.heatmap.astype("<f4", copy=False).tobytes()
        data += frame.offsets.astype("<f4", copy=False).tobytes()
        sink.write(data)
        written += len(data)
    return written


def _read_exact(source: BinaryIO, n: int, frame_index: int) -> bytes:
    data = source.read(n)
    if data is None or len(data) < n:
        got = 0 if data is None else len(data)
        raise TruncatedFrameError(frame_index, f"wanted {n} bytes, got {got}")
    return data


def read_header(source: BinaryIO) -> SequenceHeader:
    """Read and validate the 32-byte header; shapes must match the canonical model."""
    raw = source.read(HEADER_SIZE)
    if raw is None or len(raw) < HEADER_SIZE:
        raise BadMagicError("input shorter than a sequence header")
    magic, version, frame_count, joint_count, grid_side, depth_bins, input_side = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}, expected {VERSION}")
    header = SequenceHeader(frame_count, joint_count, grid_side, depth_bins, input_side)
    if (
        header.joint_count != JOINT_COUNT
        or header.grid_side != GRID_SIDE
        or header.depth_bins != DEPTH_BINS
        or header.input_side != GEOMETRY.input_side
    ):
        raise ShapeMismatchError(
            "header declares joints={0.joint_count} grid={0.grid_side} "
            "depth={0.depth_bins} input={0.input_side}, expected "
            f"{JOINT_COUNT}/{GRID_SIDE}/{DEPTH_BINS}/{GEOMETRY.input_side}".format(header)
        )
    return header


def _check_finite(vol: np.ndarray, frame_index: int, name: str) -> None:
    # Reductions detect NaN/inf without allocating a frame-sized mask; the
    # mask is built only on the error path to locate the offender.
    lo, hi = float(vol.min()), float(vol.max())
    if np.isfinite(lo) and np.isfinite(hi):
        return
    flat = int(np.flatnonzero(~np.isfinite(vol.reshape(-1)))[0])
    channel, rest = divmod(flat, _CELLS)
    row, col = divmod(rest, GRID_SIDE)
    raise NonFiniteValueError(frame_index, name, channel, row, col)


def read_sequence(source: BinaryIO) -> Iterator[TensorFrame]:
    """Iterate frames of a sequence lazily, one frame in memory at a time.

    The header is read and validated immediately; frames are decoded as the
    iterator is consumed.
    """
    header = read_header(source)

    def frames() -> Iterator[TensorFrame]:
        for i in range(header.frame_count):
            hm_raw = _read_exact(source, HEATMAP_BYTES, i)
            heatmap = np.frombuffer(hm_raw, dtype="<f4").reshape(HEATMAP_SHAPE).copy()
            off_raw = _read_exact(source, OFFSET_BYTES, i)
            offsets = np.frombuffer(off_raw, dtype="<f4").reshape(OFFSET_SHAPE).copy()
            _check_finite(heatmap, i, "heatmap")
            _check_finite(offsets, i, "offsets")
            yield TensorFrame(heatmap=heatmap, offsets=offsets, frame_index=i)

    return frames()
