"""
軌跡ログとドリフト解析のテスト
"""

import math

import numpy as np
import pytest

from errors import DegenerateFitError, InsufficientDataError
from spin_metrics import analyze, drift_trend, fit_circle
from trajectory_log import COLUMN_NAMES, COLUMNS, HEADER, TrajectoryLog


def _record(t, x, y, yaw=0.0, roll=0.0, pitch=0.0):
    record = [0.0] * len(COLUMNS)
    values = {"t": t, "com_x": x, "com_y": y, "com_z": 0.29, "yaw": yaw, "roll": roll, "pitch": pitch}
    for name, value in values.items():
        record[COLUMN_NAMES.index(name)] = value
    return record


def _circle_log(center, radius, duration=10.0, dt=0.01, omega=0.7):
    log = TrajectoryLog()
    for k in range(1, int(round(duration / dt)) + 1):
        t = k * dt
        log.append(_record(
            t,
            center[0] + radius * math.cos(omega * t),
            center[1] + radius * math.sin(omega * t),
            yaw=omega * t,
            roll=0.01 * math.sin(omega * t),
            pitch=-0.02 * math.cos(omega * t),
        ))
    return log


def test_header_has_fixed_order_and_units():
    assert HEADER[:4] == ("t[s]", "com_x[m]", "com_y[m]", "com_z[m]")
    assert COLUMN_NAMES[12:16] == ("FR_contact", "FR_foot_x", "FR_foot_y", "FR_foot_z")
    assert COLUMN_NAMES[-1] == "BL_foot_z"
    assert len(COLUMNS) == 12 + 4 * 4


def test_log_rejects_bad_records():
    log = TrajectoryLog([_record(0.001, 0.0, 0.0)])
    with pytest.raises(ValueError):
        log.append([0.0] * 3)
    with pytest.raises(ValueError):
        log.append(_record(0.001, 0.0, 0.0))
    assert len(log) == 1


def test_csv_round_trip_is_bit_stable(tmp_path):
    log = _circle_log((1.0 / 3.0, -2.0 / 7.0), 0.0112, duration=1.0)
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    log.write_csv(str(first))

    reread = TrajectoryLog.read_csv(str(first))
    assert np.array_equal(reread.to_array(), log.to_array())
    reread.write_csv(str(second))
    assert first.read_bytes() == second.read_bytes()


def test_read_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("t,x,y\n0,0,0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        TrajectoryLog.read_csv(str(path))


def test_exact_circle_fit():
    theta = np.linspace(0.0, 2.0 * math.pi, 200, endpoint=False)
    points = np.column_stack([1.0 + 0.05 * np.cos(theta), 2.0 + 0.05 * np.sin(theta)])
    fit = fit_circle(points)
    assert fit.center == pytest.approx((1.0, 2.0), abs=1e-10)
    assert fit.radius == pytest.approx(0.05, abs=1e-10)
    assert fit.radial_variance == pytest.approx(0.0, abs=1e-20)


def test_radial_noise_variance():
    rng = np.random.default_rng(17)
    sigma = 0.001
    theta = rng.uniform(0.0, 2.0 * math.pi, 1000)
    radius = 0.05 + rng.normal(0.0, sigma, 1000)
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    fit = fit_circle(points)
    assert fit.radial_variance == pytest.approx(sigma ** 2, rel=0.2)
    assert fit.radius == pytest.approx(0.05, abs=2e-4)


def test_collinear_points_are_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_circle([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])
    with pytest.raises(DegenerateFitError):
        fit_circle([(0.0, 0.0), (1.0, 1.0)])


def test_circle_fit_translation_equivariance():
    rng = np.random.default_rng(23)
    theta = rng.uniform(0.0, 2.0 * math.pi, 300)
    points = np.column_stack([0.02 * np.cos(theta), 0.02 * np.sin(theta)]) + rng.normal(0.0, 1e-4, (300, 2))
    shift = np.array([0.7, -1.3])
    base = fit_circle(points)
    moved = fit_circle(points + shift)
    assert np.array(moved.center) == pytest.approx(np.array(base.center) + shift, abs=1e-12)
    assert moved.radius == pytest.approx(base.radius, abs=1e-12)
    assert moved.radial_variance == pytest.approx(base.radial_variance, abs=1e-12)


def test_stationary_log_reports_zero_radius():
    log = TrajectoryLog([_record(k * 0.01, 0.2, -0.1) for k in range(1, 1001)])
    metrics = analyze(log, trim_seconds=5.0)
    assert metrics.fit_radius == 0.0
    assert metrics.radial_variance == 0.0
    assert metrics.spin_radius == 0.0
    assert metrics.drift_x == 0.0 and metrics.drift_y == 0.0
    assert metrics.trend_slope == 0.0


def test_synthetic_circle_log():
    center = (0.3, -0.1)
    metrics = analyze(_circle_log(center, 0.0112), trim_seconds=5.0, center=center)
    assert metrics.fit_radius == pytest.approx(0.0112, abs=1e-9)
    assert metrics.fit_center == pytest.approx(center, abs=1e-9)
    assert metrics.spin_radius == pytest.approx(0.0112, abs=1e-9)
    assert metrics.mean_error == pytest.approx(0.0112, abs=1e-9)
    assert metrics.radial_variance == pytest.approx(0.0, abs=1e-18)
    assert metrics.roll_variance > 0.0
    assert metrics.duration == pytest.approx(4.99, abs=0.011)
    assert metrics.spin_center == center


def test_default_center_is_first_logged_position():
    log = _circle_log((0.0, 0.0), 0.0112)
    metrics = analyze(log, trim_seconds=5.0)
    first = log.to_array()[0]
    assert metrics.spin_center == (first[1], first[2])


def test_trimming_longer_than_log():
    log = _circle_log((0.0, 0.0), 0.01, duration=2.0)
    with pytest.raises(InsufficientDataError):
        analyze(log, trim_seconds=5.0)
    with pytest.raises(InsufficientDataError):
        analyze(TrajectoryLog(), trim_seconds=0.0)
    with pytest.raises(InsufficientDataError):
        analyze(log, trim_seconds=0.5, min_duration=10.0)


def test_analysis_is_deterministic_and_survives_serialization(tmp_path):
    log = _circle_log((0.1, 0.1), 0.012, duration=8.0)
    path = tmp_path / "run.csv"
    log.write_csv(str(path))
    assert analyze(log, 5.0).to_dict() == analyze(log, 5.0).to_dict()
    assert analyze(TrajectoryLog.read_csv(str(path)), 5.0).to_dict() == analyze(log, 5.0).to_dict()


def test_metrics_dict_uses_lists():
    data = analyze(_circle_log((0.0, 0.0), 0.01), 5.0).to_dict()
    assert isinstance(data["fit_center"], list)
    assert isinstance(data["trend_ci"], list)
    assert data["samples"] in (499, 500, 501)


def test_trend_detects_linear_growth():
    rng = np.random.default_rng(31)
    t = np.arange(1, 10001) * 0.001
    distances = 0.002 + 0.0005 * t + rng.normal(0.0, 1e-5, t.size)
    trend = drift_trend(t, distances)
    assert trend.slope == pytest.approx(0.0005, rel=0.05)
    assert not trend.contains_zero
    assert trend.ci_low > 0.0


def test_trend_of_periodic_distance_contains_zero():
    t = np.arange(1, 10001) * 0.001
    distances = 0.01 + 0.001 * np.sin(2.0 * math.pi * 0.7 * t)
    trend = drift_trend(t, distances)
    assert trend.contains_zero
    assert trend.effective_samples < 500


def test_trend_needs_three_samples():
    with pytest.raises(InsufficientDataError):
        drift_trend(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
