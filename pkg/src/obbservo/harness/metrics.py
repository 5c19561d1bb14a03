"""Convergence times and precision metrics of a servo episode."""

from __future__ import annotations

import math

import numpy as np

from ..loop import EpisodeRecord

DEFAULT_THRESHOLDS = (1.0, 1.0)  # px, deg
# tail used for MAE when an episode never settles
UNCONVERGED_TAIL_FRACTION = 0.25

SUMMARY_FIELDS = (
    "converged", "t_r", "t_phi", "mae_x_mm", "mae_y_mm", "mae_phi_deg",
    "tail_start", "recrossings_px", "recrossings_deg",
    "avg_speed_mm_s", "avg_speed_rad_s",
    "final_pixel_error", "final_orientation_error_deg",
    "max_overshoot_ratio", "max_emitted_ratio",
)


def settle_time(t: np.ndarray, err: np.ndarray, threshold: float,
                first_crossing: bool = False) -> float | None:
    """Time after which ``err`` stays below ``threshold``; ``None`` if it never does.

    With ``first_crossing`` the first sample below the threshold is used instead.
    """
    below = err < threshold
    if first_crossing:
        idx = np.flatnonzero(below)
        return float(t[idx[0]]) if len(idx) else None
    if not below[-1]:
        return None
    above = np.flatnonzero(~below)
    return float(t[0]) if len(above) == 0 else float(t[above[-1] + 1])


def recrossings(err: np.ndarray, threshold: float) -> int:
    """Number of below -> above transitions after the error first drops below the threshold."""
    below = err < threshold
    if not below.any():
        return 0
    b = below[int(np.argmax(below)):]
    return int(np.count_nonzero(b[:-1] & ~b[1:]))


def compute_metrics(record: EpisodeRecord, thresholds=DEFAULT_THRESHOLDS,
                    first_crossing: bool = False, velocity_limits=None) -> dict:
    if len(record) == 0:
        raise ValueError("cannot summarize an empty episode")
    px_thr, deg_thr = thresholds
    t = record.column("t")
    px = record.column("pixel_error")
    deg = np.abs(record.column("orientation_error_deg"))
    t_r = settle_time(t, px, px_thr, first_crossing)
    t_phi = settle_time(t, deg, deg_thr, first_crossing)
    # first-crossing times say nothing about holding, so check the end state too
    converged = (t_r is not None and t_phi is not None
                 and bool(px[-1] < px_thr) and bool(deg[-1] < deg_thr))
    if t_r is not None and t_phi is not None:
        tail_start = max(t_r, t_phi)
    else:
        tail_start = float(t[0] + (1.0 - UNCONVERGED_TAIL_FRACTION) * (t[-1] - t[0]))
    tail = t >= tail_start

    v = np.column_stack([record.column(c) for c in ("v_x", "v_y", "omega")])
    speed = 1000.0 * np.hypot(v[:, 0], v[:, 1])

    def mean_before(values, t_end):
        if t_end is None or t_end <= t[0]:
            return math.nan
        return float(values[t < t_end].mean())

    if velocity_limits is None:
        velocity_limits = record.config.get("velocity_limits")
    emitted = (float((np.abs(v) / np.asarray(velocity_limits)).max())
               if velocity_limits is not None else math.nan)
    return {
        "converged": converged,
        "t_r": t_r,
        "t_phi": t_phi,
        "mae_x_mm": float(np.abs(record.column("x_mm")[tail]).mean()),
        "mae_y_mm": float(np.abs(record.column("y_mm")[tail]).mean()),
        "mae_phi_deg": float(deg[tail].mean()),
        "tail_start": float(tail_start),
        "recrossings_px": recrossings(px, px_thr),
        "recrossings_deg": recrossings(deg, deg_thr),
        "avg_speed_mm_s": mean_before(speed, t_r),
        "avg_speed_rad_s": mean_before(np.abs(v[:, 2]), t_phi),
        "final_pixel_error": float(px[-1]),
        "final_orientation_error_deg": float(deg[-1]),
        "max_overshoot_ratio": float(record.column("overshoot_ratio").max()),
        "max_emitted_ratio": emitted,
    }
