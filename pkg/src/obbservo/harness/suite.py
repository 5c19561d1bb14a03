"""Experiment suites over initial-error grids and their CSV / manifest outputs."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..loop import ROW_FIELDS, EpisodeRecord, LoopConfig, run_episode
from ..simulator import NoiseModel, RobotState
from .metrics import DEFAULT_THRESHOLDS, SUMMARY_FIELDS, compute_metrics
from .profiles import (
    DEFAULT_NOISE,
    ExperimentGrid,
    RobotProfile,
    generate_grid,
    scene_noise,
    to_dict,
)

# (row label, summary key), one table row each
TABLE_ROWS = (
    ("dx [mm]", "mae_x_mm"),
    ("dy [mm]", "mae_y_mm"),
    ("dphi_z [deg]", "mae_phi_deg"),
    ("t_r [s]", "t_r"),
    ("t_phi [s]", "t_phi"),
    ("v_r [mm/s]", "avg_speed_mm_s"),
    ("v_phi [rad/s]", "avg_speed_rad_s"),
    ("converged", "n_converged"),
    ("episodes", "n_episodes"),
    ("max overshoot", "max_overshoot_ratio"),
    ("max emitted", "max_emitted_ratio"),
)


def episode_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


@dataclass
class EpisodeResult:
    index: int
    initial: RobotState
    record: EpisodeRecord
    summary: dict


@dataclass
class SuiteResult:
    profile: RobotProfile
    grid: ExperimentGrid
    scene: str
    seed: int
    episodes: list[EpisodeResult]
    settings: dict = field(default_factory=dict)

    @property
    def table(self) -> dict:
        return aggregate([e.summary for e in self.episodes])

    @property
    def all_converged(self) -> bool:
        return all(e.summary["converged"] for e in self.episodes)

    @property
    def label(self) -> str:
        return f"{self.profile.name}/{self.grid.name}/{self.scene}"


def aggregate(summaries: list[dict]) -> dict:
    """Column of a results table: means over episodes (times over converged ones only)."""
    def mean(key, only_converged=False):
        vals = [s[key] for s in summaries
                if s[key] is not None and not (isinstance(s[key], float) and math.isnan(s[key]))
                and (s["converged"] or not only_converged)]
        return float(np.mean(vals)) if vals else None

    return {
        "mae_x_mm": mean("mae_x_mm"),
        "mae_y_mm": mean("mae_y_mm"),
        "mae_phi_deg": mean("mae_phi_deg"),
        "t_r": mean("t_r", True),
        "t_phi": mean("t_phi", True),
        "avg_speed_mm_s": mean("avg_speed_mm_s", True),
        "avg_speed_rad_s": mean("avg_speed_rad_s", True),
        "n_converged": sum(bool(s["converged"]) for s in summaries),
        "n_episodes": len(summaries),
        "max_overshoot_ratio": max(s["max_overshoot_ratio"] for s in summaries),
        "max_emitted_ratio": max(s["max_emitted_ratio"] for s in summaries),
    }


def _episode(args) -> tuple[EpisodeRecord, dict]:
    profile, noise, sim_kw, loop, initial, duration, thresholds, first_crossing = args
    rec = run_episode(profile.sim_config(noise, **sim_kw), profile.limits, profile.timing,
                      initial, duration, loop)
    rec.summary = compute_metrics(rec, thresholds, first_crossing)
    return rec, rec.summary


def run_suite(profile: RobotProfile, grid: ExperimentGrid, scene: str = "normal", seed: int = 0, *,
              loop: LoopConfig | None = None, base_noise: NoiseModel = DEFAULT_NOISE,
              duration: float = 20.0, cross_product: bool = False, first_crossing: bool = False,
              thresholds=DEFAULT_THRESHOLDS, latency: float | None = None,
              hand_eye_signs=(-1.0, -1.0, 1.0), jobs: int = 1) -> SuiteResult:
    """One episode per grid state; episode ``i`` draws noise from ``episode_seed(seed, i)``."""
    loop = loop or LoopConfig()
    initials = generate_grid(grid, cross_product)
    sim_kw = {"latency": latency, "hand_eye_signs": tuple(hand_eye_signs)}
    args = [
        (profile, scene_noise(scene, base_noise, episode_seed(seed, i)), sim_kw, loop, s0,
         duration, thresholds, first_crossing)
        for i, s0 in enumerate(initials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            outputs = list(pool.map(_episode, args))
    else:
        outputs = [_episode(a) for a in args]
    episodes = [EpisodeResult(i, s0, rec, summ)
                for i, (s0, (rec, summ)) in enumerate(zip(initials, outputs))]
    settings = {
        "loop": to_dict(loop),
        "base_noise": to_dict(base_noise),
        "duration": duration,
        "cross_product": cross_product,
        "first_crossing": first_crossing,
        "thresholds": list(thresholds),
        "latency": latency,
        "hand_eye_signs": list(hand_eye_signs),
    }
    return SuiteResult(profile, grid, scene, seed, episodes, settings)


# -- output files ------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "nan" if math.isnan(value) else repr(value)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def write_episode_csv(record: EpisodeRecord, path) -> None:
    ints = {ROW_FIELDS.index("cycle")}
    rows = ([int(v) if j in ints else v for j, v in enumerate(row)] for row in record.rows.tolist())
    _write_csv(Path(path), ROW_FIELDS, rows)


def read_episode_csv(path, config: dict | None = None) -> EpisodeRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != ROW_FIELDS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = np.array([[float(v) for v in row] for row in reader])
    return EpisodeRecord(rows=rows.reshape(-1, len(ROW_FIELDS)), config=dict(config or {}))


def episode_summary_rows(result: SuiteResult):
    header = ("index", "x0_mm", "y0_mm", "phi0_deg", "seed") + SUMMARY_FIELDS
    rows = [
        (e.index, e.initial.x, e.initial.y, math.degrees(e.initial.phi),
         e.record.config.get("seed"), *(e.summary[k] for k in SUMMARY_FIELDS))
        for e in sorted(result.episodes, key=lambda e: e.index)
    ]
    return header, rows


def write_table(columns: dict[str, dict], path) -> None:
    """Metrics as rows, one column per suite."""
    labels = list(columns)
    rows = [(name, *(columns[lab][key] for lab in labels)) for name, key in TABLE_ROWS]
    _write_csv(Path(path), ("metric", *labels), rows)


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def manifest(result: SuiteResult, files: list[str]) -> dict:
    payload = {
        "profile": to_dict(result.profile),
        "grid": to_dict(result.grid),
        "scene": result.scene,
        "seed": result.seed,
        **result.settings,
    }
    return {
        "package": "obbservo",
        "version": __version__,
        "config_hash": config_hash(payload),
        "config": payload,
        "episode_seeds": [e.record.config.get("seed") for e in result.episodes],
        "files": sorted(files),
    }


def write_suite(result: SuiteResult, out_dir, figures: bool = False) -> dict[str, Path]:
    out = Path(out_dir)
    (out / "episodes").mkdir(parents=True, exist_ok=True)
    paths = {}
    for e in result.episodes:
        p = out / "episodes" / f"episode_{e.index:03d}.csv"
        write_episode_csv(e.record, p)
        paths[f"episode_{e.index:03d}"] = p
    header, rows = episode_summary_rows(result)
    _write_csv(out / "episodes.csv", header, rows)
    paths["episodes"] = out / "episodes.csv"
    write_table({result.label: result.table}, out / "summary.csv")
    paths["summary"] = out / "summary.csv"
    if figures:
        from .plots import plot_episode, plot_suite

        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        paths["fig_suite"] = plot_suite(result, fig_dir / "suite.png")
        for e in result.episodes:
            paths[f"fig_{e.index:03d}"] = plot_episode(
                e.record, fig_dir / f"episode_{e.index:03d}.png", title=f"{result.label} #{e.index}"
            )
    files = [str(p.relative_to(out)) for p in paths.values()]
    (out / "manifest.json").write_text(json.dumps(manifest(result, files), indent=2, sort_keys=True) + "\n")
    paths["manifest"] = out / "manifest.json"
    return paths


def scaled_noise(base: NoiseModel, factor: float) -> NoiseModel:
    return dataclasses.replace(base, sigma_center=base.sigma_center * factor,
                               sigma_phi=base.sigma_phi * factor)
