import numpy as np
import pytest
from hypothesis import given, strategies as st

from obbservo.filtering import MavgBuffer
from obbservo.geometry import NormalizedCommand


def cmd(rx, ry, phi):
    return NormalizedCommand((rx, ry), phi)


def test_capacity_one_holds_last_push():
    buf = MavgBuffer(1)
    buf.push(cmd(0.3, -0.4, 0.2))
    assert buf.ordered().tolist() == [[0.3, -0.4, 0.2]]


def test_zero_init_then_one_push():
    buf = MavgBuffer(3)
    buf.push(cmd(0.6, 0.6, 1.0))
    assert buf.ordered().tolist() == [[0, 0, 0], [0, 0, 0], [0.6, 0.6, 1.0]]


def test_fifo_eviction():
    buf = MavgBuffer(2)
    for phi in (0.1, 0.2, 0.3):
        buf.push(cmd(0, 0, phi))
    assert buf.ordered()[:, 2].tolist() == [0.2, 0.3]


def test_mean_examples():
    buf = MavgBuffer(3)
    for phi in (1.0, 2.0, 3.0):
        buf.slots[buf.write_index, 2] = phi
        buf.write_index = (buf.write_index + 1) % 3
    assert buf.mean()[1] == pytest.approx(2.0)

    buf = MavgBuffer(3)
    buf.slots[0, 2] = 3.0
    assert buf.mean()[1] == pytest.approx(1.0)

    buf = MavgBuffer(4)
    for r in [(1, 0), (0, 1), (-1, 0), (0, -1)]:
        buf.push(cmd(*r, 0.0))
    np.testing.assert_allclose(buf.mean()[0], [0, 0], atol=1e-15)


def test_capacity_must_be_positive():
    with pytest.raises(ValueError):
        MavgBuffer(0)


def test_constant_input_reaches_value_after_n_pushes():
    buf = MavgBuffer(7)
    for _ in range(7):
        buf.push(cmd(0.3, -0.1, -0.7))
    r, phi = buf.mean()
    np.testing.assert_allclose(r, [0.3, -0.1], atol=1e-12)
    assert phi == pytest.approx(-0.7, abs=1e-12)


unit_cmd = st.tuples(
    st.floats(0, 1), st.floats(0, 2 * np.pi), st.floats(-1, 1)
).map(lambda t: cmd(t[0] * np.cos(t[1]), t[0] * np.sin(t[1]), t[2]))


@given(st.integers(1, 9), st.lists(unit_cmd, max_size=30))
def test_filter_never_amplifies(n, cmds):
    buf = MavgBuffer(n)
    for c in cmds:
        buf.push(c)
        r, phi = buf.mean()
        assert np.hypot(*r) <= 1 + 1e-12
        assert abs(phi) <= 1 + 1e-12
