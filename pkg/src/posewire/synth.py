"""Synthetic tensor frames with known ground truth, plus a naive reference decoder.

``render_frame`` inverts the decoding algorithm: it drops a single peak into
each joint's slab at the rounded ground-truth cell, plants that cell's exact
sub-cell offsets, and fills everything else with bounded noise. Background
heatmap values stay strictly below half the peak, so the argmax is unique and
decode(render(truth)) recovers the pose without error (for truths whose
coordinates are 32-bit representable, see ``random_truth``).

``oracle_decode`` re-implements decoding as plain exhaustive loops with no
shortcuts, kept deliberately independent of the decoder module; equal maxima
resolve to the smallest (k, v, u), the shared tie-break rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import RawJoint, RawPose
from .skeleton import JOINT_COUNT, JOINTS
from .tensorio import (
    DEPTH_BINS,
    GRID_SIDE,
    HEATMAP_CHANNELS,
    HEATMAP_SHAPE,
    OFFSET_SHAPE,
    TensorFrame,
)

# Rounded cells must stay inside the grid, so usable coordinates stop short
# of 27.5; the generator leaves extra margin for float32 rounding.
TRUTH_COORD_MAX = 27.25


@dataclass(frozen=True)
class GroundTruthPose:
    """24 known grid-space joint positions and the heatmap peak height."""

    positions: np.ndarray  # (24, 3) float64, each component in [0, 28)
    peak_value: float = 1.0

    def __post_init__(self) -> None:
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", pos)
        if pos.shape != (JOINT_COUNT, 3):
            raise ValueError(f"positions shape {pos.shape}, expected ({JOINT_COUNT}, 3)")
        if not np.all((pos >= 0.0) & (pos < GRID_SIDE)):
            raise ValueError("all coordinates must lie inside [0, 28)")
        cells = np.rint(pos).astype(np.int64)
        if not np.all((cells >= 0) & (cells < GRID_SIDE)):
            raise ValueError("a coordinate rounds to a cell outside the grid")
        if not self.peak_value > 0:
            raise ValueError("peak_value must be positive")


def random_truth(rng: np.random.Generator, peak_value: float = 1.0) -> GroundTruthPose:
    """Uniform random pose with float32-clean coordinates in [0, 27.25].

    Coordinates are rounded to float32 so the planted offsets survive 32-bit
    tensor storage exactly and recovery is bit-exact, not approximate.
    """
    pos = rng.random((JOINT_COUNT, 3)) * TRUTH_COORD_MAX
    pos = pos.astype(np.float32).astype(np.float64)
    return GroundTruthPose(positions=pos, peak_value=peak_value)


def render_frame(
    truth: GroundTruthPose,
    rng: np.random.Generator | None = None,
    frame_index: int = 0,
) -> TensorFrame:
    """Render heatmap + offset volumes whose decode is exactly ``truth``."""
    if rng is None:
        rng = np.random.default_rng(0)
    half = np.float32(truth.peak_value / 2.0)
    heatmap = rng.random(HEATMAP_SHAPE, dtype=np.float32) * half  # background < peak/2
    offsets = rng.random(OFFSET_SHAPE, dtype=np.float32) * 2.0 - 1.0
    peak = np.float32(truth.peak_value)
    for j in range(JOINT_COUNT):
        x, y, z = truth.positions[j]
        u = int(np.rint(x))
        v = int(np.rint(y))
        k = int(np.rint(z))
        channel = j * DEPTH_BINS + k
        heatmap[channel, v, u] = peak
        offsets[channel, v, u] = np.float32(x - u)
        offsets[HEATMAP_CHANNELS + channel, v, u] = np.float32(y - v)
        offsets[2 * HEATMAP_CHANNELS + channel, v, u] = np.float32(z - k)
    return TensorFrame(heatmap=heatmap, offsets=offsets, frame_index=frame_index)


def oracle_decode(frame: TensorFrame) -> RawPose:
    """Reference decode: exhaustive scan of every cell of every slab."""
    heatmap = frame.heatmap
    offsets = frame.offsets
    plane = GRID_SIDE * GRID_SIDE
    joints = []
    for j in range(JOINT_COUNT):
        cells = heatmap[j * DEPTH_BINS : (j + 1) * DEPTH_BINS].reshape(-1).tolist()
        best = float("-inf")
        best_i = 0
        for i, value in enumerate(cells):
            if value > best:
                best = value
                best_i = i
        k, rest = divmod(best_i, plane)
        v, u = divmod(rest, GRID_SIDE)
        channel = j * DEPTH_BINS + k
        dx = float(offsets[channel, v, u])
        dy = float(offsets[672 + channel, v, u])
        dz = float(offsets[1344 + channel, v, u])
        joints.append(
            RawJoint(
                joint=JOINTS[j],
                grid_pos=(u + dx, v + dy, k + dz),
                peak_cell=(k, v, u),
                confidence=best,
            )
        )
    return RawPose(joints=tuple(joints), frame_index=frame.frame_index)


def random_frame(rng: np.random.Generator, quantized: bool = False, frame_index: int = 0) -> TensorFrame:
    """Arbitrary finite tensors for fuzzing; ``quantized`` forces heatmap ties."""
    heatmap = rng.random(HEATMAP_SHAPE, dtype=np.float32)
    if quantized:
        heatmap = np.floor(heatmap * 4.0) / np.float32(4.0)
    offsets = rng.random(OFFSET_SHAPE, dtype=np.float32) * 2.0 - 1.0
    return TensorFrame(heatmap=heatmap, offsets=offsets, frame_index=frame_index)


def make_sequence(
    n_frames: int, seed: int, peak_value: float = 1.0
) -> tuple[list[TensorFrame], list[GroundTruthPose]]:
    """Deterministic synthetic sequence plus its ground truths."""
    rng = np.random.default_rng(seed)
    frames = []
    truths = []
    for i in range(n_frames):
        truth = random_truth(rng, peak_value=peak_value)
        frames.append(render_frame(truth, rng=rng, frame_index=i))
        truths.append(truth)
    return frames, truths


def write_truth_sidecar(truths: list[GroundTruthPose], sink) -> None:
    """One line per frame: 24 space-separated x y z triples, full precision."""
    for truth in truths:
        sink.write(" ".join(repr(v) for v in truth.positions.reshape(-1)) + "\n")


def read_truth_sidecar(source) -> list[np.ndarray]:
    """Parse sidecar lines back into (24, 3) position arrays."""
    out = []
    for line in source:
        if not line.strip():
            continue
        values = np.array([float(tok) for tok in line.split()], dtype=np.float64)
        if values.size != JOINT_COUNT * 3:
            raise ValueError(f"expected {JOINT_COUNT * 3} values per line, got {values.size}")
        out.append(values.reshape(JOINT_COUNT, 3))
    return out
