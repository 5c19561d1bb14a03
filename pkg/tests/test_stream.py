import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from obbservo.geometry import ImagePoint, NormalizedCommand, ObbDetection
from obbservo.loop import LoopConfig, LoopState, ServoPlanner, detection_tick
from obbservo.planner import KinematicLimits, Timing
from obbservo.stream import (
    CommandSlot,
    RealtimeServo,
    StreamFormatError,
    format_detection_line,
    format_velocity_line,
    parse_detection_line,
    read_detections,
    replay,
)

LIMITS = KinematicLimits(0.25, 1.0, 5.0, 1.0, 4.0, 20.0)
TIMING = Timing(1 / 60, 1 / 500)
TARGET = ImagePoint(1024, 768)


def test_parse_full_line():
    t, det = parse_detection_line("0.5,1000.25,760,240,120,-0.1")
    assert t == 0.5
    assert det == ObbDetection(ImagePoint(1000.25, 760.0), 240.0, 120.0, -0.1, 0.5)


def test_parse_lost_and_comments():
    assert parse_detection_line("1.25") == (1.25, None)
    assert parse_detection_line("   ") is None
    assert parse_detection_line("# header") is None


@pytest.mark.parametrize("line", [
    "0,1,2,3,4",            # too few fields
    "0,1,2,3,4,5,6",        # too many
    "0,1;5,2,3,4,5",        # foreign separator
    "0,1,2,3,4,nan",        # no special values
    "0,inf,2,3,4,0",
    "0,1 000,2,3,4,0",      # no grouping
    "0,0x10,2,3,4,0",
    "0,1,2,-3,4,0",         # invalid OBB size
])
def test_parse_rejects(line):
    with pytest.raises(StreamFormatError):
        parse_detection_line(line, 7)


def test_parse_accepts_exponents_and_signs():
    t, det = parse_detection_line("+1e-3,.5,2.,1E2,4,-0")
    assert (t, det.center.x, det.center.y, det.width) == (0.001, 0.5, 2.0, 100.0)


@given(
    st.floats(0, 1e6), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4),
    st.floats(1e-3, 1e4), st.floats(1e-3, 1e4), st.floats(-math.pi, math.pi),
)
def test_round_trip_bit_exact(t, cx, cy, w, h, phi):
    det = ObbDetection(ImagePoint(cx, cy), w, h, phi, t)
    t2, det2 = parse_detection_line(format_detection_line(det))
    assert t2 == t and det2 == det


def test_read_detections_skips_noise():
    text = "# t,cx,cy,w,h,phi\n0.0,1024,768,10,5,0\n\n0.1\n"
    out = list(read_detections(io.StringIO(text)))
    assert [t for t, _ in out] == [0.0, 0.1]
    assert out[1][1] is None


def test_velocity_line():
    assert format_velocity_line(0.002, [0.1, -0.2, 0.0]) == "0.002,0.1,-0.2,0.0"


def test_replay_matches_direct_planning():
    """A constant stream replayed at zero latency equals iterating the planner by hand."""
    det = ObbDetection(ImagePoint(TARGET.x - 300, TARGET.y + 120), 10, 5, 0.05)
    stream = [(i * TIMING.t_d, det) for i in range(30)]
    out = list(replay(stream, TARGET, LIMITS, TIMING, duration=0.25))
    assert len(out) == 126

    planner = ServoPlanner(LIMITS, TIMING)
    state = LoopState.initial()
    loop = LoopConfig()
    state.latest_cmd = detection_tick(det, TARGET, loop.params)
    cycles = [planner.control_cycle(state).trajectory.samples for _ in range(16)]
    assert np.array_equal(out[0][1], cycles[0][0])
    # second cycle starts on the first tick at or after T_D
    start = math.ceil(TIMING.t_d / TIMING.t_r)
    assert np.array_equal(out[start][1], cycles[1][0])


def test_replay_deterministic_and_bounded():
    rng = np.random.default_rng(0)
    stream = [(i * TIMING.t_d, ObbDetection(ImagePoint(*(TARGET.as_array() + rng.normal(0, 50, 2))),
                                            10, 5, rng.normal(0, 0.2), i * TIMING.t_d))
              for i in range(60)]
    a = list(replay(stream, TARGET, LIMITS, TIMING, latency=TIMING.t_d))
    b = list(replay(list(reversed(stream)), TARGET, LIMITS, TIMING, latency=TIMING.t_d))
    assert all(x[0] == y[0] and np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    assert max(np.abs(v / LIMITS.velocity_limits()).max() for _, v in a) <= 1.0


def test_command_slot():
    slot = CommandSlot()
    cmd = NormalizedCommand((0.1, 0.0), 0.0)
    slot.put(cmd)
    slot.put(None)
    assert slot.snapshot() == (cmd, 1, 2)
    slot.put(cmd)
    assert slot.snapshot() == (cmd, 0, 3)


def test_realtime_short_run():
    sent = []
    servo = RealtimeServo(TARGET, LIMITS, Timing(0.02, 0.005), lambda t, v: sent.append((t, v.copy())))
    text = "".join(f"{i * 0.02!r},{TARGET.x - 200!r},{TARGET.y!r},10,5,0.0\n" for i in range(5))
    stats = servo.run(io.StringIO(text), duration=0.15)
    assert stats.detections == 5
    assert stats.cycles >= 2 and stats.samples >= 8
    times = [t for t, _ in sent]
    assert times == sorted(times)
    assert all(np.abs(v).max() <= LIMITS.v_max for _, v in sent)
