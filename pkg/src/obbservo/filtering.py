"""Moving-average smoothing of normalized commands."""

from __future__ import annotations

import numpy as np

from .geometry import NormalizedCommand


class MavgBuffer:
    """Fixed-size ring of ``(r_x, r_y, phi)`` entries, zero-filled on construction.

    The zero fill means the first ``capacity`` pushes are diluted (soft start).
    """

    def __init__(self, capacity: int = 5):
        if capacity < 1:
            raise ValueError(f"filter capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.slots = np.zeros((self.capacity, 3))
        self.write_index = 0

    def push(self, cmd: NormalizedCommand) -> "MavgBuffer":
        self.slots[self.write_index] = (cmd.r_n[0], cmd.r_n[1], cmd.phi_n)
        self.write_index = (self.write_index + 1) % self.capacity
        return self

    def mean(self) -> tuple[np.ndarray, float]:
        # sum of N^-1 * entry, not sum / N, to match the weighting literally
        avg = (self.slots / self.capacity).sum(axis=0)
        return avg[:2].copy(), float(avg[2])

    def ordered(self) -> np.ndarray:
        """Slots from oldest to newest."""
        return np.roll(self.slots, -self.write_index, axis=0)

    def reset(self):
        self.slots[:] = 0.0
        self.write_index = 0

    def copy(self) -> "MavgBuffer":
        dup = MavgBuffer(self.capacity)
        dup.slots = self.slots.copy()
        dup.write_index = self.write_index
        return dup
