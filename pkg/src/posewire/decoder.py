"""Volumetric heatmap decoding: slab argmax plus offset refinement.

Joint ``j`` owns the 28 heatmap channels ``[j*28, (j+1)*28)``, one per depth
bin; the strongest cell across that slab gives the coarse grid cell
``(k, v, u)`` = (depth, row, column). The offset volume stores sub-cell
corrections in three 672-channel blocks, X then Y then Z, each indexed by
``j*28 + k`` within the block. The refined grid-space position is
``(u + dx, v + dy, k + dz)`` and the peak score is the joint's confidence.

Equal maxima resolve to the lexicographically smallest (k, v, u), which is
exactly the first maximum in channel-major scan order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import JOINT_COUNT, JOINTS, JointId
from .tensorio import DEPTH_BINS, GRID_SIDE, HEATMAP_CHANNELS, TensorFrame

_CELLS = GRID_SIDE * GRID_SIDE
_X_BASE = 0
_Y_BASE = HEATMAP_CHANNELS
_Z_BASE = 2 * HEATMAP_CHANNELS


@dataclass(frozen=True)
class RawJoint:
    """One decoded joint in grid space."""

    joint: JointId
    grid_pos: tuple[float, float, float]
    peak_cell: tuple[int, int, int]  # (k, v, u)
    confidence: float


@dataclass(frozen=True)
class RawPose:
    """All 24 decoded joints of one frame, in canonical joint order."""

    joints: tuple[RawJoint, ...]
    frame_index: int = 0

    def positions(self) -> np.ndarray:
        """Grid-space (24, 3) float64 positions in canonical order."""
        return np.array([j.grid_pos for j in self.joints], dtype=np.float64)

    def confidences(self) -> np.ndarray:
        return np.array([j.confidence for j in self.joints], dtype=np.float64)


def argmax_slab(heatmap: np.ndarray, joint: JointId) -> tuple[int, int, int, float]:
    """Strongest cell of the joint's 28-channel slab: (k, v, u, score)."""
    slab = heatmap[joint.index * DEPTH_BINS : (joint.index + 1) * DEPTH_BINS]
    flat = int(np.argmax(slab))  # first maximum in C order = smallest (k, v, u)
    k, rest = divmod(flat, _CELLS)
    v, u = divmod(rest, GRID_SIDE)
    return k, v, u, float(slab[k, v, u])


def read_offsets(
    offsets: np.ndarray, joint: JointId, peak_cell: tuple[int, int, int]
) -> tuple[float, float, float]:
    """Sub-cell (dx, dy, dz) stored for the joint at its peak cell."""
    k, v, u = peak_cell
    channel = joint.index * DEPTH_BINS + k
    dx = float(offsets[_X_BASE + channel, v, u])
    dy = float(offsets[_Y_BASE + channel, v, u])
    dz = float(offsets[_Z_BASE + channel, v, u])
    return dx, dy, dz


def decode_joint(frame: TensorFrame, joint: JointId) -> RawJoint:
    """Argmax the joint's slab, then refine the cell with its offsets."""
    k, v, u, score = argmax_slab(frame.heatmap, joint)
    dx, dy, dz = read_offsets(frame.offsets, joint, (k, v, u))
    return RawJoint(
        joint=joint,
        grid_pos=(u + dx, v + dy, k + dz),
        peak_cell=(k, v, u),
        confidence=score,
    )


def decode_pose(frame: TensorFrame) -> RawPose:
    """Decode all 24 joints independently, in canonical order."""
    return RawPose(
        joints=tuple(decode_joint(frame, joint) for joint in JOINTS),
        frame_index=frame.frame_index,
    )


def decode_pose_parallel(frame: TensorFrame, executor) -> RawPose:
    """decode_pose with per-joint work fanned out to an executor.

    Results are identical to the serial path; joints are reassembled in
    canonical order regardless of completion order.
    """
    joints = tuple(executor.map(lambda j: decode_joint(frame, j), JOINTS))
    assert len(joints) == JOINT_COUNT
    return RawPose(joints=joints, frame_index=frame.frame_index)
