"""Temporal jitter suppression: a cascaded low-pass over a 7-slot history window.

Each incoming pose shifts the window (oldest slot discarded, everything else
moves one slot back) and lands raw in slot 0. A forward sweep then blends
every slot toward its newer neighbour, per joint coordinate:

    H[i] = H[i-1] * smooth + H[i] * (1 - smooth)    for i = 1..6

and slot 6 is the emitted pose. All outputs are convex combinations of raw
inputs, so a constant stream is a fixed point and outputs never leave the
range of coordinates seen so far. The first pose floods the whole window,
avoiding a startup transient toward the origin.

Smoothing happens in grid space, before image-pixel conversion; confidences
pass through untouched.
"""

from __future__ import annotations

import numpy as np

from .decoder import RawPose
from .skeleton import JOINT_COUNT
from .stream import PoseFrame

WINDOW_SLOTS = 7  # current frame plus six historical


class PoseSmoother:
    """Stateful per-stream filter; feed frames strictly in order.

    One instance serves one stream. ``smooth`` in [0, 1): 0 turns the window
    into a pure delay line, values toward 1 weight history more heavily.
    """

    def __init__(self, smooth: float = 0.5) -> None:
        if not 0.0 <= smooth < 1.0:
            raise ValueError(f"smooth coefficient must be in [0, 1), got {smooth}")
        self.smooth = float(smooth)
        self._keep = 1.0 - self.smooth
        self._window: list[np.ndarray] | None = None

    @property
    def initialized(self) -> bool:
        return self._window is not None

    def reset(self) -> None:
        """Forget all history; the next frame re-floods the window."""
        self._window = None

    def __call__(self, raw: RawPose) -> PoseFrame:
        """Smooth one pose; returns slot 6 of the window after the sweep.

        The result carries ``seq`` from the raw frame index and a zero
        timestamp; the streaming producer stamps emission time.
        """
        pos = raw.positions()
        if pos.shape != (JOINT_COUNT, 3):
            raise ValueError(f"expected ({JOINT_COUNT}, 3) positions, got {pos.shape}")
        if self._window is None:
            self._window = [pos.copy() for _ in range(WINDOW_SLOTS)]
            out = pos
        else:
            w = self._window
            w.pop()
            w.insert(0, pos.copy())
            for i in range(1, WINDOW_SLOTS):
                w[i] = w[i - 1] * self.smooth + w[i] * self._keep
            out = w[WINDOW_SLOTS - 1]
        joints = np.empty((JOINT_COUNT, 4), dtype=np.float64)
        joints[:, :3] = out
        joints[:, 3] = raw.confidences()
        return PoseFrame(seq=raw.frame_index, timestamp_us=0, joints=joints)
