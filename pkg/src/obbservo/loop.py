"""Detection and planning tasks wired into a closed loop.

The detection side turns an OBB into a normalized command; the planning side
filters the latest command, maps it to per-axis targets and emits a quintic
velocity profile sampled at the controller rate. The two sides exchange only
the most recent command. :func:`run_episode` interleaves them in simulated
time against :mod:`obbservo.simulator`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .filtering import MavgBuffer
from .geometry import (
    ImagePoint,
    NormalizationParams,
    NormalizedCommand,
    ObbDetection,
    direction_to_target,
    normalize_direction,
    normalize_orientation,
)
from .planner import (
    BoundaryState,
    KinematicLimits,
    PlanningError,
    QuinticSegment,
    QuinticSolver,
    Timing,
    VelocityTrajectory,
    map_targets,
    sample_times,
)
from .simulator import (
    DetectionLost,
    RobotState,
    SimConfig,
    camera_observe,
    robot_step,
    true_pixel_error,
)

log = logging.getLogger(__name__)

# cycles a lost detection is bridged with the previous command before ramping down
LOST_HOLD_CYCLES = 3
_EPS_T = 1e-9


def detection_tick(detection: ObbDetection | None, target: ImagePoint,
                   params: NormalizationParams) -> NormalizedCommand | None:
    """Normalized command for one detection; ``None`` means hold the previous one."""
    if detection is None:
        return None
    r = direction_to_target(target, detection.center)
    r_n = normalize_direction(r, params)
    phi_n = normalize_orientation(detection.phi, params)
    return NormalizedCommand((float(r_n[0]), float(r_n[1])), phi_n, detection.timestamp)


@dataclass
class LoopState:
    filter: MavgBuffer
    latest_cmd: NormalizedCommand = field(default_factory=NormalizedCommand.zero)
    # rows x, y, phi; columns v, a, j
    boundary: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    cycle_index: int = 0
    lost_cycles: int = 0

    @classmethod
    def initial(cls, filter_size: int = 5) -> "LoopState":
        return cls(MavgBuffer(filter_size))

    def planner_boundary(self) -> list[BoundaryState]:
        return [BoundaryState(*row) for row in self.boundary]


def apply_command(state: LoopState, cmd: NormalizedCommand | None) -> None:
    """Publish a detection result to the planner's latest-value slot.

    A lost detection keeps the previous command for up to
    ``LOST_HOLD_CYCLES`` detections, then zeroes it so the filter ramps down.
    """
    if cmd is None:
        state.lost_cycles += 1
        if state.lost_cycles > LOST_HOLD_CYCLES:
            state.latest_cmd = NormalizedCommand.zero(state.latest_cmd.timestamp)
    else:
        state.lost_cycles = 0
        state.latest_cmd = cmd


@dataclass
class CycleResult:
    trajectory: VelocityTrajectory
    coeffs: np.ndarray | None  # (6, 3), one column per axis, local time [0, T_D]
    overshoot: np.ndarray  # pre-clamp max |v|/limit per axis
    command_time: float
    t_d: float
    failed: bool = False

    @property
    def segments(self) -> list[QuinticSegment] | None:
        if self.coeffs is None:
            return None
        return [QuinticSegment(self.coeffs[:, i], 0.0, self.t_d) for i in range(3)]


class ServoPlanner:
    """Planning side of the loop; owns the factored boundary matrix for [0, T_D]."""

    def __init__(self, limits: KinematicLimits, timing: Timing, clamp: bool = True):
        self.limits = limits
        self.timing = timing
        self.clamp = clamp
        self.solver = QuinticSolver.for_interval(0.0, timing.t_d)
        self._lim = limits.table()
        self._vmax = limits.velocity_limits()
        # monomials at the K sample times, so sampling is one matrix product
        self._vander = np.vander(sample_times(0.0, timing), 6, increasing=True)

    def control_cycle(self, state: LoopState) -> CycleResult:
        state.filter.push(state.latest_cmd)
        r_f, phi_f = state.filter.mean()
        targets = map_targets(r_f, phi_f, self.limits)
        target = np.array([t.as_array() for t in targets])
        b = np.hstack([state.boundary, target]).T  # (6, 3), one column per axis
        state.cycle_index += 1
        try:
            coeffs = self.solver.solve(b)
            if not np.all(np.isfinite(coeffs)):
                raise PlanningError("non-finite quintic coefficients")
        except PlanningError:
            log.exception("planning failed in cycle %d, ramping down", state.cycle_index)
            return self._ramp_down(state)
        samples = self._vander @ coeffs
        ratios = np.abs(samples).max(axis=0) / self._vmax
        if self.clamp and ratios.max() > 1.0:
            samples = np.clip(samples, -self._vmax, self._vmax)
        state.boundary = target
        return CycleResult(VelocityTrajectory(samples, self.timing.t_r), coeffs, ratios,
                           state.latest_cmd.timestamp, self.timing.t_d)

    def _ramp_down(self, state: LoopState) -> CycleResult:
        k = self.timing.k
        start = state.boundary[:, 0]
        frac = 1.0 - np.arange(k) / k
        traj = VelocityTrajectory(np.outer(frac, start), self.timing.t_r)
        state.boundary = np.zeros((3, 3))
        ratios = np.abs(start) / self._vmax
        return CycleResult(traj, None, ratios, state.latest_cmd.timestamp, self.timing.t_d,
                           failed=True)


def control_cycle(state: LoopState, limits: KinematicLimits, timing: Timing,
                  clamp: bool = True) -> tuple[VelocityTrajectory, LoopState]:
    result = ServoPlanner(limits, timing, clamp).control_cycle(state)
    return result.trajectory, state


ROW_FIELDS = (
    "t", "cycle", "r_n_x", "r_n_y", "phi_n",
    "pixel_error", "detected_pixel_error",
    "x_mm", "y_mm", "position_error_mm", "orientation_error_deg",
    "v_x", "v_y", "omega", "overshoot_ratio",
)


@dataclass
class EpisodeRecord:
    """Per-tick trace of one episode; columns follow :data:`ROW_FIELDS`."""

    rows: np.ndarray
    config: dict = field(default_factory=dict)
    cycle_starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    command_ages: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # per-cycle planned segments (3 per cycle), kept only when requested
    segments: list | None = None
    detections_lost: int = 0
    planning_failures: int = 0
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, ROW_FIELDS.index(name)]

    def __len__(self):
        return len(self.rows)

    @property
    def final_state(self) -> RobotState:
        last = self.rows[-1]
        return RobotState(last[7], last[8], math.radians(last[10]), last[0])


@dataclass(frozen=True)
class LoopConfig:
    params: NormalizationParams = field(default_factory=NormalizationParams)
    filter_size: int = 5
    clamp: bool = True


def run_episode(sim: SimConfig, limits: KinematicLimits, timing: Timing,
                initial: RobotState, duration: float = 20.0,
                loop: LoopConfig | None = None, keep_segments: bool = False) -> EpisodeRecord:
    """Simulate one servo episode in lockstep simulated time.

    Control ticks fall on multiples of ``T_R``; images are captured on
    multiples of ``T_D`` (using the exact robot pose at the capture instant)
    and their commands become visible ``detection_latency`` later. A planning
    cycle starts on the first tick at or after each multiple of ``T_D``; if
    its K samples run out before the next cycle, the last sample is held.
    """
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    loop = loop or LoopConfig()
    if not math.isclose(sim.control_period, timing.t_r) or not math.isclose(sim.detection_period, timing.t_d):
        raise ValueError("simulator periods and planner timing disagree")
    params, cam = loop.params, sim.camera
    planner = ServoPlanner(limits, timing, loop.clamp)
    state = LoopState.initial(loop.filter_size)
    rng = np.random.default_rng(sim.noise.seed)
    signs = np.asarray(sim.hand_eye_signs)
    t_r, t_d, latency = timing.t_r, timing.t_d, sim.latency

    n_ticks = int(math.floor(duration / t_r + _EPS_T)) + 1
    rows = np.zeros((n_ticks, len(ROW_FIELDS)))
    cycle_starts, ages, kept = [], [], []
    pending: list[tuple[float, NormalizedCommand | None, float]] = []
    next_capture = 0  # index m of the next capture at m * t_d
    next_cycle = 0
    robot = RobotState(initial.x, initial.y, initial.phi, 0.0)
    traj, sample_idx, overshoot = None, 0, 0.0
    detected_err = float("nan")
    lost = failures = 0
    v = np.zeros(3)

    for i in range(n_ticks):
        t = i * t_r
        # captures strictly before this tick see the pose reached under the previous twist
        while next_capture * t_d <= t + _EPS_T:
            tc = next_capture * t_d
            pose = robot if tc >= t - _EPS_T else robot_step(robot_prev, *v, tc - t_prev)
            pose = RobotState(pose.x, pose.y, pose.phi, tc)
            try:
                det = camera_observe(pose, sim, rng)
                cmd = detection_tick(det, cam.target, params)
                err = math.hypot(cam.target.x - det.center.x, cam.target.y - det.center.y)
            except DetectionLost:
                cmd, err = None, float("nan")
                lost += 1
            pending.append((tc + latency, cmd, err))
            next_capture += 1
        while pending and pending[0][0] <= t + _EPS_T:
            _, cmd, err = pending.pop(0)
            detected_err = err
            apply_command(state, cmd)
        if next_cycle * t_d <= t + _EPS_T:
            result = planner.control_cycle(state)
            failures += result.failed
            traj, sample_idx = result.trajectory, 0
            overshoot = float(result.overshoot.max())
            cycle_starts.append(i)
            ages.append(t - result.command_time)
            if keep_segments:
                kept.append(result.segments)
            next_cycle = int(math.floor(t / t_d + _EPS_T)) + 1
        sample = traj.samples[min(sample_idx, len(traj) - 1)]
        sample_idx += 1
        cmd = state.latest_cmd
        rows[i] = (
            t, state.cycle_index, cmd.r_n[0], cmd.r_n[1], cmd.phi_n,
            true_pixel_error(robot, cam), detected_err,
            robot.x, robot.y, robot.position_error, math.degrees(robot.phi),
            *sample, overshoot,
        )
        v = signs * sample
        robot_prev, t_prev = robot, t
        robot = robot_step(robot, *v, t_r)

    return EpisodeRecord(
        rows=rows,
        config={
            "velocity_limits": limits.velocity_limits().tolist(),
            "t_d": t_d, "t_r": t_r, "k": timing.k,
            "scale": cam.scale, "seed": sim.noise.seed,
        },
        cycle_starts=np.asarray(cycle_starts, dtype=int),
        command_ages=np.asarray(ages),
        segments=kept if keep_segments else None,
        detections_lost=lost,
        planning_failures=failures,
    )
