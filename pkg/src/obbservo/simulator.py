"""Deterministic kinematic stand-in for the robot and its eye-in-hand camera.

The robot is a planar 3-DoF Cartesian stage (x, y in mm, phi in rad) that
integrates commanded twists with explicit Euler steps. The camera is a
fixed-scale orthographic projection: the object's image position is
``target - scale * (x, y)``, so moving the robot +x moves the object's image
-x. Detector imprecision and clutter are modelled as Gaussian noise plus
random outliers on the detected center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ImagePoint, ObbDetection, wrap_angle


class DetectionLost(Exception):
    """The object left the image; no detection is produced this frame."""


@dataclass(frozen=True)
class RobotState:
    x: float = 0.0  # mm
    y: float = 0.0  # mm
    phi: float = 0.0  # rad
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.phi, self.t)):
            raise ValueError(f"non-finite robot state {self}")
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def position_error(self) -> float:
        return math.hypot(self.x, self.y)

    def mirrored(self) -> "RobotState":
        """Reflect through the origin (x, y, phi) -> (-x, -y, -phi)."""
        return RobotState(-self.x, -self.y, -self.phi, self.t)


@dataclass(frozen=True)
class CameraModel:
    scale: float = 10.0  # px/mm
    image_width: float = 2048.0
    image_height: float = 1536.0
    target: ImagePoint | None = None
    # object footprint in the image, only used to fill in the OBB size
    object_width: float = 240.0
    object_height: float = 120.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"camera scale must be positive, got {self.scale}")
        if self.target is None:
            object.__setattr__(
                self, "target", ImagePoint(self.image_width / 2, self.image_height / 2)
            )
        if not (0 <= self.target.x <= self.image_width and 0 <= self.target.y <= self.image_height):
            raise ValueError(f"target {self.target} outside the {self.image_width}x{self.image_height} image")

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.image_width and 0.0 <= y <= self.image_height


@dataclass(frozen=True)
class NoiseModel:
    sigma_center: float = 2.0  # px
    sigma_phi: float = math.radians(1.0)
    outlier_prob: float = 0.0
    outlier_radius: float = 0.0  # px
    seed: int = 0

    def __post_init__(self):
        if min(self.sigma_center, self.sigma_phi, self.outlier_radius) < 0:
            raise ValueError("noise magnitudes must be nonnegative")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError(f"outlier_prob must lie in [0, 1], got {self.outlier_prob}")

    @classmethod
    def zero(cls, seed: int = 0) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0, 0.0, seed)


@dataclass(frozen=True)
class SimConfig:
    camera: CameraModel = field(default_factory=CameraModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    detection_period: float = 1 / 60
    control_period: float = 1 / 500
    detection_latency: float | None = None  # defaults to one detection period
    # image command -> robot twist; eye-in-hand flips translation
    hand_eye_signs: tuple[float, float, float] = (-1.0, -1.0, 1.0)

    def __post_init__(self):
        if not (self.detection_period > 0 and self.control_period > 0):
            raise ValueError("detection and control periods must be positive")
        if self.detection_latency is not None and self.detection_latency < 0:
            raise ValueError(f"latency must be >= 0, got {self.detection_latency}")
        if any(abs(s) != 1.0 for s in self.hand_eye_signs):
            raise ValueError(f"hand-eye signs must be +-1, got {self.hand_eye_signs}")
        object.__setattr__(self, "hand_eye_signs", tuple(float(s) for s in self.hand_eye_signs))

    @property
    def latency(self) -> float:
        """Detection latency, one detection period unless configured."""
        return self.detection_period if self.detection_latency is None else self.detection_latency


def robot_step(state: RobotState, v_x: float, v_y: float, omega: float, dt: float) -> RobotState:
    """Advance by ``dt`` seconds under a constant twist; v in m/s, omega in rad/s."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return RobotState(
        state.x + 1000.0 * v_x * dt,
        state.y + 1000.0 * v_y * dt,
        state.phi + omega * dt,
        state.t + dt,
    )


def true_image_center(state: RobotState, camera: CameraModel) -> tuple[float, float]:
    return (camera.target.x - camera.scale * state.x, camera.target.y - camera.scale * state.y)


def true_pixel_error(state: RobotState, camera: CameraModel) -> float:
    return camera.scale * state.position_error


def camera_observe(state: RobotState, config: SimConfig, rng: np.random.Generator) -> ObbDetection:
    """One noisy OBB detection of the object as seen from ``state``.

    Random draws happen in a fixed order every frame (center noise, phi noise,
    outlier coin, outlier offset) so the stream is reproducible from the seed
    regardless of which branches fire.
    """
    cam, noise = config.camera, config.noise
    cx, cy = true_image_center(state, cam)
    dc = rng.normal(0.0, 1.0, 2) * noise.sigma_center
    dphi = rng.normal() * noise.sigma_phi
    coin = rng.random()
    mag = noise.outlier_radius * math.sqrt(rng.random())
    ang = 2.0 * math.pi * rng.random()
    if not cam.contains(cx, cy):
        raise DetectionLost(f"object at ({cx:.1f}, {cy:.1f}) px is outside the image")
    cx += dc[0]
    cy += dc[1]
    if coin < noise.outlier_prob:
        cx += mag * math.cos(ang)
        cy += mag * math.sin(ang)
    # the object appears rotated opposite to the camera
    phi = wrap_angle(-state.phi + dphi)
    return ObbDetection(ImagePoint(cx, cy), cam.object_width, cam.object_height, phi, state.t)
