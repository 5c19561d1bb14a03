"""Line-delimited detection input for external detectors.

One detection per line, comma separated, fields in this order and units::

    timestamp,cx,cy,w,h,phi        # s, px, px, px, px, rad

Numbers are plain decimal text with a dot separator (optional sign and
exponent); no locale handling, no thousands separators, no nan/inf. A line
holding only a timestamp reports a lost detection. Blank lines and lines
starting with ``#`` are ignored. Floats are written with ``repr`` so a
format/parse round trip is bit-exact.

Two consumers are provided: :func:`replay`, which steps the planner in
simulated time over a recorded stream, and :class:`RealtimeServo`, which runs
detection and planning as two wall-clock tasks sharing a latest-value slot.
"""

from __future__ import annotations

import logging
import math
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, TextIO

import numpy as np

from .geometry import ImagePoint, NormalizationParams, NormalizedCommand, ObbDetection
from .loop import LOST_HOLD_CYCLES, LoopConfig, LoopState, ServoPlanner, apply_command, detection_tick
from .planner import KinematicLimits, Timing

log = logging.getLogger(__name__)

FIELDS = ("timestamp", "cx", "cy", "w", "h", "phi")
_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


class StreamFormatError(ValueError):
    pass


def _number(text: str, name: str, lineno: int | None) -> float:
    text = text.strip()
    if not _NUMBER.fullmatch(text):
        where = f"line {lineno}: " if lineno is not None else ""
        raise StreamFormatError(f"{where}field {name!r} is not a plain decimal number: {text!r}")
    return float(text)


def parse_detection_line(line: str, lineno: int | None = None):
    """``(timestamp, ObbDetection | None)`` for a data line, ``None`` for blank/comment lines."""
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    parts = line.split(",")
    if len(parts) == 1:
        return _number(parts[0], "timestamp", lineno), None
    if len(parts) != len(FIELDS):
        raise StreamFormatError(
            f"line {lineno}: expected {len(FIELDS)} fields {FIELDS}, got {len(parts)}"
        )
    t, cx, cy, w, h, phi = (_number(p, n, lineno) for p, n in zip(parts, FIELDS))
    try:
        det = ObbDetection(ImagePoint(cx, cy), w, h, phi, t)
    except ValueError as exc:
        raise StreamFormatError(f"line {lineno}: {exc}") from exc
    return t, det


def format_detection_line(det: ObbDetection | None, timestamp: float | None = None) -> str:
    if det is None:
        return repr(float(timestamp))
    vals = (det.timestamp if timestamp is None else timestamp,
            det.center.x, det.center.y, det.width, det.height, det.phi)
    return ",".join(repr(float(v)) for v in vals)


def read_detections(lines: Iterable[str]) -> Iterator[tuple[float, ObbDetection | None]]:
    for lineno, line in enumerate(lines, 1):
        parsed = parse_detection_line(line, lineno)
        if parsed is not None:
            yield parsed


def format_velocity_line(t: float, sample) -> str:
    return ",".join(repr(float(v)) for v in (t, *sample))


def replay(detections: Iterable[tuple[float, ObbDetection | None]], target: ImagePoint,
           limits: KinematicLimits, timing: Timing, loop: LoopConfig | None = None,
           latency: float = 0.0, duration: float | None = None) -> Iterator[tuple[float, np.ndarray]]:
    """Velocity samples ``(t, [v_x, v_y, omega])`` for a recorded detection stream.

    Detection ``i`` stamped ``t_i`` becomes visible at ``t_i + latency``;
    planning cycles start on the first control tick at or after each multiple
    of ``T_D``, exactly as in :func:`obbservo.loop.run_episode`. The output is
    in the image frame (no hand-eye mapping).
    """
    loop = loop or LoopConfig()
    dets = sorted(detections, key=lambda d: d[0])
    if duration is None:
        duration = (dets[-1][0] + latency + timing.t_d) if dets else timing.t_d
    planner = ServoPlanner(limits, timing, loop.clamp)
    state = LoopState.initial(loop.filter_size)
    eps = 1e-9
    n_ticks = int(math.floor(duration / timing.t_r + eps)) + 1
    j, next_cycle, traj, idx = 0, 0, None, 0
    for i in range(n_ticks):
        t = i * timing.t_r
        while j < len(dets) and dets[j][0] + latency <= t + eps:
            apply_command(state, detection_tick(dets[j][1], target, loop.params))
            j += 1
        if next_cycle * timing.t_d <= t + eps:
            traj, idx = planner.control_cycle(state).trajectory, 0
            next_cycle = int(math.floor(t / timing.t_d + eps)) + 1
        yield t, traj.samples[min(idx, len(traj) - 1)].copy()
        idx += 1


class CommandSlot:
    """Single-producer/single-consumer latest-value exchange."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value: NormalizedCommand | None = None
        self._lost = 0
        self._version = 0

    def put(self, cmd: NormalizedCommand | None) -> None:
        with self._lock:
            if cmd is None:
                self._lost += 1
            else:
                self._value, self._lost = cmd, 0
            self._version += 1

    def snapshot(self) -> tuple[NormalizedCommand | None, int, int]:
        with self._lock:
            return self._value, self._lost, self._version


@dataclass
class RealtimeStats:
    cycles: int = 0
    samples: int = 0
    overruns: int = 0
    detections: int = 0


class RealtimeServo:
    """Wall-clock mode: a detection reader thread and a planner thread at T_R.

    ``send`` receives ``(t, sample)`` for every control tick. When a planning
    cycle takes longer than one control period the previous sample is repeated
    and the overrun is counted and logged.
    """

    def __init__(self, target: ImagePoint, limits: KinematicLimits, timing: Timing,
                 send: Callable[[float, np.ndarray], None], loop: LoopConfig | None = None,
                 clock: Callable[[], float] = time.monotonic):
        self.target = target
        self.timing = timing
        self.loop = loop or LoopConfig()
        self.planner = ServoPlanner(limits, timing, self.loop.clamp)
        self.send = send
        self.clock = clock
        self.slot = CommandSlot()
        self.stats = RealtimeStats()
        self._stop = threading.Event()

    def feed(self, stream: TextIO) -> None:
        """Read detection lines until EOF or stop; runs on the detection thread."""
        for lineno, line in enumerate(stream, 1):
            if self._stop.is_set():
                break
            try:
                parsed = parse_detection_line(line, lineno)
            except StreamFormatError:
                log.exception("dropping malformed detection line")
                continue
            if parsed is None:
                continue
            self.slot.put(detection_tick(parsed[1], self.target, self.loop.params))
            self.stats.detections += 1

    def _plan(self, state: LoopState, start: float) -> None:
        t_r = self.timing.t_r
        last = np.zeros(3)
        tick = 0
        while not self._stop.is_set():
            cmd, lost, _ = self.slot.snapshot()
            if cmd is not None and lost <= LOST_HOLD_CYCLES:
                state.latest_cmd = cmd
            elif lost > LOST_HOLD_CYCLES:
                state.latest_cmd = NormalizedCommand.zero()
            t0 = self.clock()
            traj = self.planner.control_cycle(state).trajectory
            self.stats.cycles += 1
            if self.clock() - t0 > t_r:
                self.stats.overruns += 1
                log.warning("planning cycle %d overran T_R", self.stats.cycles)
                self.send(tick * t_r, last)
                tick += 1
            next_start = int(math.ceil(self.stats.cycles * self.timing.t_d / t_r - 1e-9))
            cycle_ticks = max(1, next_start - tick)
            for i in range(cycle_ticks):
                if self._stop.is_set():
                    return
                last = traj.samples[min(i, len(traj) - 1)]
                self.send(tick * t_r, last)
                self.stats.samples += 1
                tick += 1
                delay = start + tick * t_r - self.clock()
                if delay > 0:
                    time.sleep(delay)

    def run(self, stream: TextIO, duration: float | None = None) -> RealtimeStats:
        """Serve until ``duration`` seconds have passed (forever if ``None``)."""
        state = LoopState.initial(self.loop.filter_size)
        reader = threading.Thread(target=self.feed, args=(stream,), daemon=True)
        planner = threading.Thread(target=self._plan, args=(state, self.clock()), daemon=True)
        reader.start()
        planner.start()
        planner.join(duration)
        self._stop.set()
        planner.join()
        return self.stats
