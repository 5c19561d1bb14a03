"""Command line entry point: ``obbservo run|suite|sweep|stream``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .harness.metrics import SUMMARY_FIELDS, compute_metrics
from .harness.profiles import (
    DEFAULT_NOISE,
    GRIDS,
    PROFILES,
    SCENES,
    ConfigError,
    generate_grid,
    load_config,
    resolve_grid,
    resolve_profile,
    scene_noise,
    to_dict,
)
from .harness.suite import (
    SuiteResult,
    config_hash,
    episode_seed,
    run_suite,
    scaled_noise,
    write_episode_csv,
    write_suite,
    write_table,
    _write_csv,
)
from .loop import LoopConfig, run_episode
from .simulator import RobotState, SimConfig

log = logging.getLogger("obbservo")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {text}")
    return value


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser, single_profile: bool = True) -> None:
    if single_profile:
        p.add_argument("--profile", default="fast",
                       help=f"bundled profile ({', '.join(PROFILES)}) or RobotProfile JSON file")
        p.add_argument("--scene", choices=SCENES, default="normal")
        p.add_argument("--grid", default="small",
                       help=f"bundled grid ({', '.join(GRIDS)}) or ExperimentGrid JSON file")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--duration", type=float, default=20.0, help="episode length [s]")
    p.add_argument("--cross-product", action="store_true",
                   help="every circle position with every angle error")
    p.add_argument("--first-crossing", action="store_true",
                   help="settle time = first time below threshold instead of last crossing")
    p.add_argument("--sim", type=Path, help="SimConfig JSON: noise, latency, hand-eye signs")
    p.add_argument("--loop", type=Path, help="LoopConfig JSON: vicinities, filter size, clamping")
    p.add_argument("--filter-size", type=int, help="override the moving-average size N")
    p.add_argument("--noise-scale", type=float, default=1.0,
                   help="multiplier on the Gaussian detector noise (0 = noise free)")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obbservo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a single episode")
    _common(p)
    p.add_argument("--index", type=int, default=0, help="grid state to start from")
    p.add_argument("--x", type=float, help="initial x error [mm] (overrides --index)")
    p.add_argument("--y", type=float, default=0.0, help="initial y error [mm]")
    p.add_argument("--phi", type=float, default=0.0, help="initial rotation error [deg]")

    p = sub.add_parser("suite", help="one episode per state of an initial-error grid")
    _common(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="suites over profiles, grids, scenes and noise levels")
    _common(p, single_profile=False)
    p.add_argument("--profiles", type=_names, default=["fast", "slow"])
    p.add_argument("--grids", type=_names, default=["small", "large"])
    p.add_argument("--scenes", type=_names, default=list(SCENES))
    p.add_argument("--noise-scales", type=_floats, default=[1.0])
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("stream", help="plan velocities for a line-delimited detection stream")
    p.add_argument("--profile", default="fast")
    p.add_argument("--loop", type=Path)
    p.add_argument("--input", type=Path, help="detection lines (default: stdin)")
    p.add_argument("--latency", type=float, default=0.0, help="replay latency [s]")
    p.add_argument("--realtime", action="store_true", help="run on the wall clock")
    p.add_argument("--duration", type=float, help="stop after this many seconds")
    return parser


def _loop_config(args) -> LoopConfig:
    loop = load_config(args.loop, LoopConfig) if args.loop else LoopConfig()
    if getattr(args, "filter_size", None) is not None:
        loop = LoopConfig(loop.params, args.filter_size, loop.clamp)
    return loop


def _sim_settings(args):
    """Base noise, latency and hand-eye signs from ``--sim`` and ``--noise-scale``."""
    noise, latency, signs = DEFAULT_NOISE, None, (-1.0, -1.0, 1.0)
    if args.sim:
        sim = load_config(args.sim, SimConfig)
        noise, latency, signs = sim.noise, sim.detection_latency, sim.hand_eye_signs
    return scaled_noise(noise, args.noise_scale), latency, signs


def _suite(args, profile, grid, scene, noise_scale=None) -> SuiteResult:
    noise, latency, signs = _sim_settings(args)
    if noise_scale is not None:
        noise = scaled_noise(noise, noise_scale / args.noise_scale if args.noise_scale else 0.0)
    return run_suite(
        profile, grid, scene, args.seed, loop=_loop_config(args), base_noise=noise,
        duration=args.duration, cross_product=args.cross_product,
        first_crossing=args.first_crossing, latency=latency, hand_eye_signs=signs,
        jobs=getattr(args, "jobs", 1),
    )


def _print_table(label: str, table: dict) -> None:
    def f(v):
        return "-" if v is None else (f"{v:.3f}" if isinstance(v, float) else str(v))
    print(f"{label}: converged {table['n_converged']}/{table['n_episodes']}  "
          f"dx {f(table['mae_x_mm'])} mm  dy {f(table['mae_y_mm'])} mm  "
          f"dphi {f(table['mae_phi_deg'])} deg  t_r {f(table['t_r'])} s  "
          f"t_phi {f(table['t_phi'])} s  max overshoot {f(table['max_overshoot_ratio'])}")


def cmd_run(args) -> int:
    profile = resolve_profile(args.profile)
    noise, latency, signs = _sim_settings(args)
    if args.x is not None:
        initial = RobotState(args.x, args.y, math.radians(args.phi))
    else:
        states = generate_grid(resolve_grid(args.grid), args.cross_product)
        initial = states[args.index]
    seed = episode_seed(args.seed, args.index)
    sim = profile.sim_config(scene_noise(args.scene, noise, seed), latency, signs)
    loop = _loop_config(args)
    rec = run_episode(sim, profile.limits, profile.timing, initial, args.duration, loop)
    rec.summary = compute_metrics(rec, first_crossing=args.first_crossing)
    args.out.mkdir(parents=True, exist_ok=True)
    write_episode_csv(rec, args.out / "episode.csv")
    _write_csv(args.out / "summary.csv", SUMMARY_FIELDS, [[rec.summary[k] for k in SUMMARY_FIELDS]])
    payload = {"profile": to_dict(profile), "sim": to_dict(sim), "loop": to_dict(loop),
               "initial": to_dict(initial), "duration": args.duration,
               "first_crossing": args.first_crossing}
    files = ["episode.csv", "summary.csv"]
    if args.figures:
        from .harness.plots import plot_episode
        plot_episode(rec, args.out / "episode.png", title=f"{profile.name}/{args.scene}")
        files.append("episode.png")
    manifest = {"package": "obbservo", "config_hash": config_hash(payload), "config": payload,
                "seed": args.seed, "files": files}
    (args.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps(rec.summary, indent=2))
    return 0


def cmd_suite(args) -> int:
    result = _suite(args, resolve_profile(args.profile), resolve_grid(args.grid), args.scene)
    write_suite(result, args.out, figures=args.figures)
    _print_table(result.label, result.table)
    return 0 if result.all_converged else 1


def cmd_sweep(args) -> int:
    columns = {}
    for pname in args.profiles:
        profile = resolve_profile(pname)
        for gname in args.grids:
            grid = resolve_grid(gname)
            for scene in args.scenes:
                for scale in args.noise_scales:
                    result = _suite(args, profile, grid, scene, noise_scale=scale)
                    label = f"{result.label}/x{scale:g}"
                    write_suite(result, args.out / label.replace("/", "_"), figures=args.figures)
                    columns[label] = result.table
                    _print_table(label, result.table)
    args.out.mkdir(parents=True, exist_ok=True)
    write_table(columns, args.out / "table.csv")
    if args.figures:
        from .harness.plots import plot_table
        plot_table(columns, args.out / "table.png")
    return 0


def cmd_stream(args) -> int:
    from .stream import RealtimeServo, format_velocity_line, read_detections, replay

    profile = resolve_profile(args.profile)
    loop = _loop_config(args)
    src = open(args.input) if args.input else sys.stdin
    out = sys.stdout
    try:
        if args.realtime:
            servo = RealtimeServo(profile.camera.target, profile.limits, profile.timing,
                                  lambda t, v: out.write(format_velocity_line(t, v) + "\n"), loop)
            stats = servo.run(src, args.duration)
            log.info("realtime: %s", stats)
        else:
            for t, v in replay(read_detections(src), profile.camera.target, profile.limits,
                               profile.timing, loop, args.latency, args.duration):
                out.write(format_velocity_line(t, v) + "\n")
    finally:
        if args.input:
            src.close()
    return 0


COMMANDS = {"run": cmd_run, "suite": cmd_suite, "sweep": cmd_sweep, "stream": cmd_stream}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"obbservo: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
