"""Image-space types and normalization of the servo error with vicinity damping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    if not math.isfinite(phi):
        raise ValueError(f"cannot wrap non-finite angle {phi!r}")
    wrapped = math.fmod(phi, TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class ImagePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"image point must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class ObbDetection:
    """Oriented bounding box ``[x, y, w, h, phi]`` reported by a detector."""

    center: ImagePoint
    width: float
    height: float
    phi: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"OBB size must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "phi", wrap_angle(self.phi))


@dataclass(frozen=True)
class NormalizationParams:
    """Vicinities (u_*) below which commands are scaled down, and aligned thresholds (eps_*)."""

    u_r: float = 600.0
    u_phi: float = math.radians(10.0)
    eps_r: float = 1.0
    eps_phi: float = math.radians(1.0)

    def __post_init__(self):
        if not self.u_r > self.eps_r >= 0:
            raise ValueError(f"need u_r > eps_r >= 0, got u_r={self.u_r}, eps_r={self.eps_r}")
        if not self.u_phi > self.eps_phi >= 0:
            raise ValueError(
                f"need u_phi > eps_phi >= 0, got u_phi={self.u_phi}, eps_phi={self.eps_phi}"
            )


@dataclass(frozen=True)
class NormalizedCommand:
    r_n: tuple[float, float]
    phi_n: float
    timestamp: float = 0.0

    def __post_init__(self):
        if math.hypot(*self.r_n) > 1.0 + 1e-12 or abs(self.phi_n) > 1.0 + 1e-12:
            raise ValueError(f"normalized command out of unit range: {self.r_n}, {self.phi_n}")

    @classmethod
    def zero(cls, timestamp: float = 0.0) -> "NormalizedCommand":
        return cls((0.0, 0.0), 0.0, timestamp)


def direction_to_target(target: ImagePoint, center: ImagePoint) -> np.ndarray:
    """Pixel vector pointing from the box center to the target."""
    return np.array([target.x - center.x, target.y - center.y], dtype=float)


def normalize_direction(r, params: NormalizationParams) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    dist = math.hypot(r[0], r[1])
    if dist <= params.eps_r:
        return np.zeros(2)
    if dist >= params.u_r:
        return r / dist
    return r / params.u_r


def normalize_orientation(phi: float, params: NormalizationParams) -> float:
    """Scalar counterpart of :func:`normalize_direction`; ``phi`` is wrapped first."""
    phi = wrap_angle(phi)
    mag = abs(phi)
    if mag <= params.eps_phi:
        return 0.0
    if mag >= params.u_phi:
        return math.copysign(1.0, phi)
    return phi / params.u_phi
