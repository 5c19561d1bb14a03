import json
import math

import numpy as np
import pytest

from obbservo.geometry import NormalizationParams
from obbservo.harness.metrics import SUMMARY_FIELDS, compute_metrics, recrossings, settle_time
from obbservo.harness.profiles import (
    FAST,
    LARGE_GRID,
    SLOW,
    SMALL_GRID,
    ConfigError,
    ExperimentGrid,
    from_dict,
    generate_grid,
    load_config,
    save_config,
    scene_noise,
    to_dict,
)
from obbservo.harness.suite import (
    aggregate,
    episode_seed,
    read_episode_csv,
    run_suite,
    write_episode_csv,
    write_suite,
)
from obbservo.loop import ROW_FIELDS, EpisodeRecord, LoopConfig, run_episode
from obbservo.simulator import NoiseModel, RobotState, SimConfig

QUIET = NoiseModel.zero()
TINY = ExperimentGrid(20.0, (-6.0, 0.0, 6.0), name="tiny")


def record_from_errors(t, px, deg):
    rows = np.zeros((len(t), len(ROW_FIELDS)))
    rows[:, ROW_FIELDS.index("t")] = t
    rows[:, ROW_FIELDS.index("pixel_error")] = px
    rows[:, ROW_FIELDS.index("orientation_error_deg")] = deg
    rows[:, ROW_FIELDS.index("x_mm")] = np.asarray(px) / 10
    return EpisodeRecord(rows, config={"velocity_limits": [0.25, 0.25, 1.0]})


# -- grids -------------------------------------------------------------------

def test_small_and_large_grids():
    small = generate_grid(SMALL_GRID)
    assert len(small) == 11
    assert all(s.position_error == pytest.approx(35.0) for s in small)
    assert [round(math.degrees(s.phi)) for s in small] == list(range(-15, 16, 3))
    large = generate_grid(LARGE_GRID)
    assert len(large) == 11
    assert all(s.position_error == pytest.approx(70.0) for s in large)
    assert [round(math.degrees(s.phi)) for s in large] == list(range(-25, 26, 5))


def test_positions_evenly_spaced():
    angles = [math.atan2(s.y, s.x) % (2 * math.pi) for s in generate_grid(SMALL_GRID)]
    assert np.diff(angles) == pytest.approx(np.full(10, 2 * math.pi / 11))


def test_zero_radius_grid():
    states = generate_grid(ExperimentGrid(0.0, (-5.0, 5.0)))
    assert all(s.x == 0 and s.y == 0 for s in states)
    assert [math.degrees(s.phi) for s in states] == pytest.approx([-5, 5])


def test_cross_product():
    states = generate_grid(ExperimentGrid(10.0, (-1.0, 0.0, 1.0), positions=4), cross_product=True)
    assert len(states) == 12


def test_grid_validation():
    with pytest.raises(ConfigError):
        ExperimentGrid(-1.0, (0.0,))
    with pytest.raises(ConfigError):
        ExperimentGrid(10.0, (-5.0, 10.0))


def test_scene_noise():
    clutter = scene_noise("clutter", NoiseModel(), seed=4)
    assert (clutter.outlier_prob, clutter.outlier_radius, clutter.seed) == (0.05, 100.0, 4)
    assert scene_noise("normal", NoiseModel()).outlier_prob == 0.0
    with pytest.raises(ConfigError):
        scene_noise("fog")


def test_episode_seed_spread():
    seeds = {episode_seed(0, i) for i in range(100)}
    assert len(seeds) == 100
    assert episode_seed(5, 3) == episode_seed(5, 3)


# -- metrics -----------------------------------------------------------------

def test_identically_zero_error():
    t = np.linspace(0, 1, 11)
    s = compute_metrics(record_from_errors(t, np.zeros(11), np.zeros(11)))
    assert s["converged"] and s["t_r"] == 0.0 and s["t_phi"] == 0.0
    assert s["mae_x_mm"] == 0.0 and s["mae_phi_deg"] == 0.0


def test_settle_time_last_crossing():
    t = np.round(np.arange(0, 5, 0.01), 2)
    err = np.where(t < 2.49, 5.0, 0.5)
    assert settle_time(t, err, 1.0) == pytest.approx(2.49)
    err[300] = 2.0  # rises above at t=3.00
    assert settle_time(t, err, 1.0) == pytest.approx(3.01)
    assert settle_time(t, err, 1.0, first_crossing=True) == pytest.approx(2.49)
    assert recrossings(err, 1.0) == 1


def test_never_converged_reports_absent():
    t = np.linspace(0, 4, 41)
    s = compute_metrics(record_from_errors(t, np.full(41, 3.0), np.zeros(41)))
    assert not s["converged"]
    assert s["t_r"] is None and s["t_phi"] == 0.0
    assert s["tail_start"] == pytest.approx(3.0)
    assert math.isnan(s["avg_speed_mm_s"])


def test_aggregate_skips_unconverged_times():
    a = {k: 0.0 for k in SUMMARY_FIELDS} | {"converged": True, "t_r": 2.0, "t_phi": 1.0}
    b = dict(a, converged=False, t_r=None, t_phi=None, mae_x_mm=2.0)
    table = aggregate([a, b])
    assert table["t_r"] == 2.0 and table["mae_x_mm"] == 1.0
    assert (table["n_converged"], table["n_episodes"]) == (1, 2)


# -- configs -----------------------------------------------------------------

@pytest.mark.parametrize("obj", [
    FAST, SLOW, SMALL_GRID,
    SimConfig(noise=NoiseModel(3.0, 0.02, 0.1, 50.0, 7), detection_latency=0.01),
    LoopConfig(NormalizationParams(u_r=300.0), 3, False),
])
def test_config_round_trip(obj, tmp_path):
    path = tmp_path / "cfg.json"
    save_config(obj, path)
    assert load_config(path, type(obj)) == obj
    assert json.loads(path.read_text())["kind"] == type(obj).__name__


def test_unknown_keys_rejected():
    data = to_dict(FAST)
    data["limits"]["v_maxx"] = 1.0
    with pytest.raises(ConfigError, match="v_maxx"):
        from_dict(data)
    data = to_dict(SMALL_GRID) | {"colour": "red"}
    with pytest.raises(ConfigError, match="colour"):
        from_dict(data)


def test_wrong_kind_rejected(tmp_path):
    path = tmp_path / "grid.json"
    save_config(SMALL_GRID, path)
    with pytest.raises(ConfigError):
        load_config(path, type(FAST))
    path.write_text('{"kind": "Nope"}')
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


# -- suites and files --------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_suite():
    return run_suite(FAST, TINY, "clutter", seed=11, duration=3.0)


def test_suite_shape(tiny_suite):
    assert len(tiny_suite.episodes) == 3
    assert [e.index for e in tiny_suite.episodes] == [0, 1, 2]
    assert tiny_suite.table["n_episodes"] == 3
    assert tiny_suite.label == "fast/tiny/clutter"


def test_summary_recomputable_from_csv(tiny_suite, tmp_path):
    for e in tiny_suite.episodes:
        path = tmp_path / f"{e.index}.csv"
        write_episode_csv(e.record, path)
        back = read_episode_csv(path, e.record.config)
        np.testing.assert_array_equal(back.rows, e.record.rows)
        again = compute_metrics(back)
        assert json.dumps(again, sort_keys=True) == json.dumps(e.summary, sort_keys=True)


def test_write_suite_deterministic(tmp_path):
    a = write_suite(run_suite(FAST, TINY, "clutter", seed=11, duration=1.0), tmp_path / "a")
    b = write_suite(run_suite(FAST, TINY, "clutter", seed=11, duration=1.0), tmp_path / "b")
    assert set(a) == set(b)
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes(), key
    manifest = json.loads(a["manifest"].read_text())
    assert manifest["config"]["seed"] == 11 and len(manifest["config_hash"]) == 64
    c = write_suite(run_suite(FAST, TINY, "clutter", seed=12, duration=1.0), tmp_path / "c")
    assert a["episode_000"].read_bytes() != c["episode_000"].read_bytes()


def test_parallel_matches_serial():
    serial = run_suite(FAST, TINY, "normal", seed=2, duration=1.0)
    parallel = run_suite(FAST, TINY, "normal", seed=2, duration=1.0, jobs=2)
    for x, y in zip(serial.episodes, parallel.episodes):
        np.testing.assert_array_equal(x.record.rows, y.record.rows)


def test_figures_written(tmp_path):
    paths = write_suite(run_suite(FAST, TINY, "normal", seed=0, duration=0.5), tmp_path, figures=True)
    assert paths["fig_suite"].stat().st_size > 0
    assert (tmp_path / "figures" / "episode_002.png").exists()


def test_grid_mirror_symmetry():
    """Reflecting the initial error reflects the whole zero-noise trajectory."""
    sim = FAST.sim_config(QUIET)
    odd = ["r_n_x", "r_n_y", "phi_n", "x_mm", "y_mm", "orientation_error_deg", "v_x", "v_y", "omega"]
    even = ["pixel_error", "position_error_mm", "overshoot_ratio"]
    for s in generate_grid(SMALL_GRID)[:4]:
        a = run_episode(sim, FAST.limits, FAST.timing, s, duration=3.0)
        b = run_episode(sim, FAST.limits, FAST.timing, s.mirrored(), duration=3.0)
        for name in odd:
            np.testing.assert_allclose(b.column(name), -a.column(name), atol=1e-9, err_msg=name)
        for name in even:
            np.testing.assert_allclose(b.column(name), a.column(name), atol=1e-9, err_msg=name)
