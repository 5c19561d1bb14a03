"""Robot-agnostic visual servoing: OBB detections in, kinematically bounded velocity profiles out."""

__version__ = "0.1.0"

from .filtering import MavgBuffer
from .geometry import (
    ImagePoint,
    NormalizationParams,
    NormalizedCommand,
    ObbDetection,
    direction_to_target,
    normalize_direction,
    normalize_orientation,
    wrap_angle,
)
from .loop import EpisodeRecord, LoopConfig, LoopState, ServoPlanner, control_cycle, detection_tick, run_episode
from .planner import (
    BoundaryState,
    KinematicLimits,
    QuinticSegment,
    Timing,
    VelocityTrajectory,
    build_system,
    check_limits,
    evaluate_trajectory,
    map_targets,
    solve_coefficients,
)
from .simulator import CameraModel, NoiseModel, RobotState, SimConfig, camera_observe, robot_step
