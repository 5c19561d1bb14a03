"""Robot profiles, experiment grids and their JSON config documents.

Every config file is a JSON object with a ``"kind"`` key naming the document
type; unknown keys are rejected. Units follow the nomenclature used across the
package: seconds, m/s (and derivatives), rad/s (and derivatives), pixels,
px/mm; grid angles are degrees.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import ImagePoint, NormalizationParams
from ..loop import LoopConfig
from ..planner import KinematicLimits, Timing
from ..simulator import CameraModel, NoiseModel, RobotState, SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RobotProfile:
    name: str
    limits: KinematicLimits
    timing: Timing
    camera: CameraModel = field(default_factory=CameraModel)

    def sim_config(self, noise: NoiseModel, latency: float | None = None,
                   hand_eye_signs=(-1.0, -1.0, 1.0)) -> SimConfig:
        return SimConfig(
            camera=self.camera,
            noise=noise,
            detection_period=self.timing.t_d,
            control_period=self.timing.t_r,
            detection_latency=latency,
            hand_eye_signs=tuple(hand_eye_signs),
        )


@dataclass(frozen=True)
class ExperimentGrid:
    radius: float  # mm
    angle_errors: tuple[float, ...]  # degrees
    positions: int | None = None  # defaults to one position per angle
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "angle_errors", tuple(float(a) for a in self.angle_errors))
        if self.radius < 0 or not math.isfinite(self.radius):
            raise ConfigError(f"grid radius must be >= 0, got {self.radius}")
        if not self.angle_errors:
            raise ConfigError("grid needs at least one angle error")
        if sorted(self.angle_errors) != sorted(-a for a in self.angle_errors):
            raise ConfigError(f"angle errors must be symmetric around 0: {self.angle_errors}")
        if self.positions is None:
            object.__setattr__(self, "positions", len(self.angle_errors))
        if self.positions < 1:
            raise ConfigError("grid needs at least one position")


FAST_LIMITS = KinematicLimits(v_max=0.25, a_max=1.0, j_max=5.0,
                              omega_max=1.0, alpha_max=4.0, zeta_max=20.0)

FAST = RobotProfile("fast", FAST_LIMITS, Timing(t_d=1 / 60, t_r=1 / 500))
SLOW = RobotProfile("slow", FAST_LIMITS.scaled(0.4), Timing(t_d=1 / 30, t_r=1 / 250))
PROFILES = {"fast": FAST, "slow": SLOW}

SMALL_GRID = ExperimentGrid(35.0, tuple(range(-15, 16, 3)), name="small")
LARGE_GRID = ExperimentGrid(70.0, tuple(range(-25, 26, 5)), name="large")
GRIDS = {"small": SMALL_GRID, "large": LARGE_GRID}

DEFAULT_NOISE = NoiseModel(sigma_center=2.0, sigma_phi=math.radians(1.0))
CLUTTER_OUTLIER_PROB = 0.05
CLUTTER_OUTLIER_RADIUS = 100.0
SCENES = ("normal", "clutter")


def scene_noise(scene: str, base: NoiseModel = DEFAULT_NOISE, seed: int | None = None) -> NoiseModel:
    """Noise model for a scene: the base Gaussian noise plus clutter outliers if asked."""
    if scene not in SCENES:
        raise ConfigError(f"unknown scene {scene!r}, expected one of {SCENES}")
    clutter = scene == "clutter"
    return NoiseModel(
        sigma_center=base.sigma_center,
        sigma_phi=base.sigma_phi,
        outlier_prob=(base.outlier_prob or CLUTTER_OUTLIER_PROB) if clutter else 0.0,
        outlier_radius=(base.outlier_radius or CLUTTER_OUTLIER_RADIUS) if clutter else 0.0,
        seed=base.seed if seed is None else seed,
    )


def generate_grid(grid: ExperimentGrid, cross_product: bool = False) -> list[RobotState]:
    """Initial robot states, evenly spaced on a circle around the target.

    By default position ``k`` is paired with ``angle_errors[k % len]``; with
    ``cross_product`` every position is combined with every angle.
    """
    states = []
    for k in range(grid.positions):
        theta = 2.0 * math.pi * k / grid.positions
        x, y = grid.radius * math.cos(theta), grid.radius * math.sin(theta)
        angles = grid.angle_errors if cross_product else (grid.angle_errors[k % len(grid.angle_errors)],)
        states.extend(RobotState(x, y, math.radians(a)) for a in angles)
    return states


# -- JSON documents ---------------------------------------------------------

def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, data: dict, where: str, **converters):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    unknown = set(data) - _fields(cls)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {k: converters[k](v) if k in converters else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _camera(data) -> CameraModel:
    return _build(CameraModel, data, "camera",
                  target=lambda p: None if p is None else ImagePoint(*p))


def _noise(data) -> NoiseModel:
    return _build(NoiseModel, data, "noise")


def profile_from_dict(data: dict) -> RobotProfile:
    return _build(RobotProfile, data, "RobotProfile",
                  limits=lambda d: _build(KinematicLimits, d, "limits"),
                  timing=lambda d: _build(Timing, d, "timing"),
                  camera=_camera)


def sim_from_dict(data: dict) -> SimConfig:
    return _build(SimConfig, data, "SimConfig", camera=_camera, noise=_noise,
                  hand_eye_signs=tuple)


def grid_from_dict(data: dict) -> ExperimentGrid:
    return _build(ExperimentGrid, data, "ExperimentGrid", angle_errors=tuple)


def loop_from_dict(data: dict) -> LoopConfig:
    return _build(LoopConfig, data, "LoopConfig",
                  params=lambda d: _build(NormalizationParams, d, "params"))


_LOADERS = {
    "RobotProfile": profile_from_dict,
    "SimConfig": sim_from_dict,
    "ExperimentGrid": grid_from_dict,
    "LoopConfig": loop_from_dict,
}


def to_dict(obj) -> dict:
    """JSON-ready dict of a config object, tagged with its ``kind``."""
    def plain(value):
        if isinstance(value, ImagePoint):
            return [value.x, value.y]
        if dataclasses.is_dataclass(value):
            return {f.name: plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, (tuple, list)):
            return [plain(v) for v in value]
        if isinstance(value, np.generic):
            return value.item()
        return value

    return {"kind": type(obj).__name__, **plain(obj)}


def from_dict(data: dict):
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _LOADERS:
        raise ConfigError(f"config document kind must be one of {sorted(_LOADERS)}, got {kind!r}")
    return _LOADERS[kind](data)


def load_config(path, expect: type | None = None):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    obj = from_dict(data)
    if expect is not None and not isinstance(obj, expect):
        raise ConfigError(f"{path}: expected a {expect.__name__} document, got {type(obj).__name__}")
    return obj


def save_config(obj, path) -> None:
    Path(path).write_text(json.dumps(to_dict(obj), indent=2, sort_keys=True) + "\n")


def resolve_profile(name: str) -> RobotProfile:
    if name in PROFILES:
        return PROFILES[name]
    return load_config(name, RobotProfile)


def resolve_grid(name: str) -> ExperimentGrid:
    if name in GRIDS:
        return GRIDS[name]
    return load_config(name, ExperimentGrid)
