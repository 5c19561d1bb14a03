"""Quintic velocity trajectory planning under kinematic limits.

Each control cycle fits, per axis (x, y, phi_z), a degree-5 polynomial in
velocity whose value, first and second derivative match a start and a target
boundary state. The target is the filtered command scaled by the axis limits,
so the boundary values never exceed the limits; the interior of a segment
can, which is what :func:`check_limits` measures and clamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import lu_factor, lu_solve

AXES = ("x", "y", "phi")
MAX_CONDITION = 1e12


class PlanningError(RuntimeError):
    """The quintic boundary-value system could not be solved reliably."""


class DegenerateIntervalError(PlanningError, ValueError):
    pass


class CommandRangeError(ValueError):
    """A filtered command left the unit ball; upstream normalization is broken."""


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float
    a_max: float
    j_max: float
    omega_max: float
    alpha_max: float
    zeta_max: float

    def __post_init__(self):
        for name in ("v_max", "a_max", "j_max", "omega_max", "alpha_max", "zeta_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    def table(self) -> np.ndarray:
        """3x3 array: rows x, y, phi; columns velocity, acceleration, jerk."""
        trans = [self.v_max, self.a_max, self.j_max]
        rot = [self.omega_max, self.alpha_max, self.zeta_max]
        return np.array([trans, trans, rot], dtype=float)

    def velocity_limits(self) -> np.ndarray:
        return np.array([self.v_max, self.v_max, self.omega_max])

    def scaled(self, factor: float) -> "KinematicLimits":
        return KinematicLimits(*(factor * v for v in (
            self.v_max, self.a_max, self.j_max,
            self.omega_max, self.alpha_max, self.zeta_max,
        )))


@dataclass(frozen=True)
class Timing:
    t_d: float
    t_r: float

    def __post_init__(self):
        if not (self.t_r > 0 and self.t_d >= 2 * self.t_r):
            raise ValueError(
                f"need t_r > 0 and t_d >= 2*t_r, got t_d={self.t_d}, t_r={self.t_r}"
            )

    @property
    def k(self) -> int:
        """Number of trajectory points per detection cycle, floor(t_d / t_r)."""
        return int(math.floor(self.t_d / self.t_r + 1e-9))


@dataclass(frozen=True)
class BoundaryState:
    v: float = 0.0
    a: float = 0.0
    j: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.a, self.j], dtype=float)


@dataclass(frozen=True)
class QuinticSegment:
    coeffs: np.ndarray
    t_start: float
    t_end: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (6,):
            raise ValueError(f"need six coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("non-finite quintic coefficients")
        if not self.t_end > self.t_start:
            raise DegenerateIntervalError(f"empty interval [{self.t_start}, {self.t_end}]")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, t, derivative: int = 0):
        c = P.polyder(self.coeffs, derivative) if derivative else self.coeffs
        return P.polyval(t, c)

    def end_state(self) -> BoundaryState:
        return BoundaryState(*(float(self(self.t_end, d)) for d in range(3)))


@dataclass
class VelocityTrajectory:
    """K samples of (v_x, v_y, omega) spaced ``dt`` apart."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite velocity sample")

    def __len__(self):
        return len(self.samples)


@dataclass
class LimitReport:
    ratios: np.ndarray  # max |v| / limit per axis
    clamped: VelocityTrajectory
    exceeded: bool = field(init=False)

    def __post_init__(self):
        self.exceeded = bool(np.max(self.ratios) > 1.0)

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))


def map_targets(r_f, phi_f: float, limits: KinematicLimits) -> list[BoundaryState]:
    """Scale the filtered command by the per-axis limits into target boundary states."""
    r_f = np.asarray(r_f, dtype=float)
    if math.hypot(r_f[0], r_f[1]) > 1.0 + 1e-9 or abs(phi_f) > 1.0 + 1e-9:
        raise CommandRangeError(f"filtered command outside unit range: r={r_f}, phi={phi_f}")
    lim = limits.table()
    cmd = np.array([r_f[0], r_f[1], phi_f])
    return [BoundaryState(*(lim[i] * cmd[i])) for i in range(3)]


def _boundary_rows(t: float) -> np.ndarray:
    return np.array([
        [1.0, t, t**2, t**3, t**4, t**5],
        [0.0, 1.0, 2 * t, 3 * t**2, 4 * t**3, 5 * t**4],
        [0.0, 0.0, 2.0, 6 * t, 12 * t**2, 20 * t**3],
    ])


def build_system(start: BoundaryState, target: BoundaryState, t_s: float, t_t: float):
    """Monomial matrix M and right-hand side b such that M @ q = b."""
    if not t_t > t_s:
        raise DegenerateIntervalError(f"target time {t_t} must exceed start time {t_s}")
    M = np.vstack([_boundary_rows(t_s), _boundary_rows(t_t)])
    b = np.concatenate([start.as_array(), target.as_array()])
    return M, b


class QuinticSolver:
    """LU factorization of a column-equilibrated boundary matrix, reused across cycles."""

    def __init__(self, M: np.ndarray, label: str = ""):
        M = np.asarray(M, dtype=float)
        if M.shape != (6, 6):
            raise ValueError(f"expected a 6x6 matrix, got {M.shape}")
        scale = np.abs(M).max(axis=0)
        if np.any(scale == 0) or not np.all(np.isfinite(M)):
            raise PlanningError(f"singular boundary matrix {label}".strip())
        self.col_scale = 1.0 / scale
        Ms = M * self.col_scale
        self.condition = float(np.linalg.cond(Ms))
        if not self.condition <= MAX_CONDITION:
            raise PlanningError(
                f"boundary system for interval {label or '?'} is ill-conditioned "
                f"(cond={self.condition:.3g})"
            )
        self.M = M
        self._lu = lu_factor(Ms)

    @classmethod
    def for_interval(cls, t_s: float, t_t: float) -> "QuinticSolver":
        M, _ = build_system(BoundaryState(), BoundaryState(), t_s, t_t)
        return cls(M, label=f"[{t_s:g}, {t_t:g}]")

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Coefficients for one right-hand side (6,) or several stacked as columns (6, n)."""
        q = lu_solve(self._lu, np.asarray(b, dtype=float))
        return q * (self.col_scale if q.ndim == 1 else self.col_scale[:, None])


def _interval_label(M: np.ndarray) -> str:
    return f"[{M[0, 1]:g}, {M[3, 1]:g}]"


def solve_coefficients(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    return QuinticSolver(M, label=_interval_label(M)).solve(b)


def plan_segment(start: BoundaryState, target: BoundaryState, t_s: float, t_t: float) -> QuinticSegment:
    M, b = build_system(start, target, t_s, t_t)
    return QuinticSegment(solve_coefficients(M, b), t_s, t_t)


def sample_times(t_s: float, timing: Timing) -> np.ndarray:
    """``t_s + i*t_r`` for i in [0, K); the segment end itself is never sampled."""
    return t_s + timing.t_r * np.arange(timing.k)


def evaluate_trajectory(segments, timing: Timing) -> VelocityTrajectory:
    segments = list(segments)
    if len(segments) != 3:
        raise ValueError(f"need one segment per axis {AXES}, got {len(segments)}")
    t_s, t_t = segments[0].t_start, segments[0].t_end
    if any(s.t_start != t_s or s.t_end != t_t for s in segments):
        raise ValueError("axis segments must share one time interval")
    t = sample_times(t_s, timing)
    return VelocityTrajectory(np.column_stack([s(t) for s in segments]), timing.t_r)


def check_limits(traj: VelocityTrajectory, limits: KinematicLimits) -> LimitReport:
    vmax = limits.velocity_limits()
    if len(traj):
        ratios = np.abs(traj.samples).max(axis=0) / vmax
    else:
        ratios = np.zeros(3)
    clamped = np.clip(traj.samples, -vmax, vmax)
    return LimitReport(ratios, VelocityTrajectory(clamped, traj.dt))


def dense_overshoot(segments, limits: KinematicLimits, points: int) -> np.ndarray:
    """Max |v|/limit per axis over ``points`` evenly spaced samples of the whole segment."""
    vmax = limits.velocity_limits()
    out = np.empty(3)
    for i, seg in enumerate(segments):
        t = np.linspace(seg.t_start, seg.t_end, points)
        out[i] = np.abs(seg(t)).max() / vmax[i]
    return out
