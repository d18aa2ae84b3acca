"""Canonical joint set, skeleton topology, and heatmap grid geometry.

Every other module indexes joints by the fixed 24-entry order below; files,
the wire protocol, and the decoder all agree on it. Positions move between
two coordinate spaces: *grid units* (heatmap cells, 0..28) and *image pixels*
(input resolution, 448 wide). Depth has no pixel calibration and stays in
grid units everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

JOINT_NAMES: tuple[str, ...] = (
    "rShldrBend",
    "rForearmBend",
    "rHand",
    "rThumb2",
    "rMid1",
    "lShldrBend",
    "lForearmBend",
    "lHand",
    "lThumb2",
    "lMid1",
    "lEar",
    "lEye",
    "rEar",
    "rEye",
    "Nose",
    "rThighBend",
    "rShin",
    "rFoot",
    "rToe",
    "lThighBend",
    "lShin",
    "lFoot",
    "lToe",
    "abdomenUpper",
)

JOINT_COUNT = len(JOINT_NAMES)  # 24


class UnknownJointError(ValueError):
    """Raised for a joint name outside the canonical 24-entry list."""


@dataclass(frozen=True)
class JointId:
    """One joint: stable index in [0, 24) plus its canonical name."""

    index: int
    name: str

    def __str__(self) -> str:
        return self.name


JOINTS: tuple[JointId, ...] = tuple(JointId(i, n) for i, n in enumerate(JOINT_NAMES))

_JOINT_BY_NAME: Mapping[str, JointId] = {j.name: j for j in JOINTS}


def joint_index(name: str) -> JointId:
    """Look up a joint by its canonical (case-sensitive) name."""
    try:
        return _JOINT_BY_NAME[name]
    except KeyError:
        raise UnknownJointError(f"unknown joint name: {name!r}") from None


@dataclass(frozen=True)
class GridGeometry:
    """Relation between the network input image and the heatmap grid."""

    input_side: int = 448
    grid_side: int = 28
    depth_bins: int = 28

    def __post_init__(self) -> None:
        if self.grid_side <= 0 or self.input_side <= 0:
            raise ValueError("grid_side and input_side must be positive")
        if self.input_side % self.grid_side != 0:
            raise ValueError(
                f"input_side {self.input_side} is not a multiple of grid_side {self.grid_side}"
            )
        if self.depth_bins != self.grid_side:
            raise ValueError("depth_bins must equal grid_side for this model family")

    @property
    def stride(self) -> int:
        """Image pixels covered by one heatmap cell."""
        return self.input_side // self.grid_side


GEOMETRY = GridGeometry()


def grid_to_image(
    grid_pos: tuple[float, float, float], geom: GridGeometry = GEOMETRY
) -> tuple[float, float, float]:
    """Scale grid-space x, y to image pixels; depth passes through in grid units."""
    x, y, z = grid_pos
    s = geom.stride
    return (x * s, y * s, z)


# Parent links: one root (abdomenUpper), limb chains out to fingers/toes,
# head chain through the nose. Needed only for bone diagnostics.
_PARENT_NAMES: dict[str, str | None] = {
    "abdomenUpper": None,
    "rShldrBend": "abdomenUpper",
    "rForearmBend": "rShldrBend",
    "rHand": "rForearmBend",
    "rThumb2": "rHand",
    "rMid1": "rHand",
    "lShldrBend": "abdomenUpper",
    "lForearmBend": "lShldrBend",
    "lHand": "lForearmBend",
    "lThumb2": "lHand",
    "lMid1": "lHand",
    "Nose": "abdomenUpper",
    "lEye": "Nose",
    "rEye": "Nose",
    "lEar": "lEye",
    "rEar": "rEye",
    "rThighBend": "abdomenUpper",
    "rShin": "rThighBend",
    "rFoot": "rShin",
    "rToe": "rFoot",
    "lThighBend": "abdomenUpper",
    "lShin": "lThighBend",
    "lFoot": "lShin",
    "lToe": "lFoot",
}


@dataclass(frozen=True)
class SkeletonTopology:
    """Parent map over the 24 joints plus the derived bone list.

    Bones are (parent, child) pairs, one per non-root joint, ordered by the
    child's joint index.
    """

    parent: Mapping[JointId, JointId | None]
    bones: tuple[tuple[JointId, JointId], ...] = field(init=False)

    def __post_init__(self) -> None:
        if set(self.parent) != set(JOINTS):
            raise ValueError("parent map must cover exactly the 24 canonical joints")
        roots = [j for j, p in self.parent.items() if p is None]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root joint, found {len(roots)}")
        # Walking parent links from every joint must reach the root without cycles.
        for j in JOINTS:
            seen = set()
            node: JointId | None = j
            while node is not None:
                if node in seen:
                    raise ValueError(f"cycle in parent links at {node.name}")
                seen.add(node)
                node = self.parent[node]
        bones = tuple(
            (self.parent[j], j) for j in JOINTS if self.parent[j] is not None
        )
        object.__setattr__(self, "bones", bones)

    @property
    def root(self) -> JointId:
        return next(j for j, p in self.parent.items() if p is None)

    def children(self, joint: JointId) -> tuple[JointId, ...]:
        return tuple(j for j in JOINTS if self.parent[j] == joint)


def default_topology() -> SkeletonTopology:
    parent = {
        joint_index(child): (joint_index(p) if p is not None else None)
        for child, p in _PARENT_NAMES.items()
    }
    return SkeletonTopology(parent=parent)


TOPOLOGY = default_topology()


def bone_lengths(pose, topo: SkeletonTopology = TOPOLOGY) -> dict[tuple[JointId, JointId], float]:
    """Euclidean length per bone, keyed (parent, child), ordered by child index.

    Accepts anything carrying 24 joint positions: an object with a ``joints``
    array whose rows start with x, y, z (extra columns such as confidence are
    ignored) or a bare (24, 3) array.
    """
    arr = np.asarray(getattr(pose, "joints", pose), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != JOINT_COUNT or arr.shape[1] < 3:
        raise ValueError(f"expected {JOINT_COUNT} joint positions, got shape {arr.shape}")
    pos = arr[:, :3]
    out: dict[tuple[JointId, JointId], float] = {}
    for parent, child in topo.bones:
        delta = pos[child.index] - pos[parent.index]
        out[(parent, child)] = float(np.linalg.norm(delta))
    return out
