"""
スピン歩行シミュレータのテスト
"""

import math

import numpy as np
import pytest

from errors import FallDetectedError
from leg_kinematics import JointLimits, forward_kinematics
from run_config import SimConfig, with_section
from spin_metrics import analyze
from spin_simulator import SpinSimulator, body_rotation, run
from sweep_runner import SweepRunner, apply_ablation
from terrain_estimator import TerrainPlane, posture_target
from trajectory_log import COLUMN_NAMES


def _config(ablation="asc", **sections):
    config = apply_ablation(SimConfig(), ablation)
    for section, changes in sections.items():
        config = with_section(config, section, **changes)
    return config


def _advance(simulator, state, ticks):
    for _ in range(ticks):
        state, _ = simulator.step(state)
    return state


def test_body_rotation_is_orthonormal():
    rotation = body_rotation(0.4, -0.2, 0.1)
    assert rotation @ rotation.T == pytest.approx(np.eye(3), abs=1e-15)
    assert np.linalg.det(rotation) == pytest.approx(1.0)
    assert body_rotation(0.0, 0.0, 0.0) == pytest.approx(np.eye(3))


def test_point_foot_without_noise_spins_in_place():
    """点足・ノイズなし・補正なしなら重心は中心から動かない"""
    config = _config(
        "baseline",
        geometry={"foot_radius": 0.0},
        sim={"noise_sigma": 0.0, "steps": 100},
    )
    log = SpinSimulator(config).run()
    assert len(log) == int(round(config.run_duration / config.sim.dt))

    cols = log.columns("com_x", "com_y", "yaw")
    assert np.max(np.hypot(cols["com_x"], cols["com_y"])) < 1e-9
    assert cols["yaw"][-1] == pytest.approx(0.7 * config.run_duration, rel=1e-9)


def test_initial_state_stands_on_four_legs():
    simulator = SpinSimulator(_config())
    state = simulator.initial_state()
    assert state.contacts == {"FR": True, "FL": False, "BR": False, "BL": True}
    assert state.position == pytest.approx([0.0, 0.0, 0.29])
    assert state.gait.stance_legs == ("FR", "BL")
    assert set(state.swing_target) == {"FL", "BR"}
    assert state.com_reference is not None
    assert simulator.tracker is not None and simulator.tracker.solution is not None


def test_reference_input():
    simulator = SpinSimulator(_config(turn={"radius": 0.5, "omega": 0.4}))
    assert simulator.reference_input() == pytest.approx((0.2, 0.4))
    assert SpinSimulator(_config()).reference_input() == (0.0, 0.7)


def test_swing_travel_grows_with_angular_velocity():
    simulator = SpinSimulator(_config())
    assert simulator.swing_travel(0.0) == 0.0
    assert simulator.swing_travel(0.8) < simulator.swing_travel(1.2)


def test_log_columns_are_consistent():
    config = _config(sim={"duration": 1.0})
    log = run(config)
    data = log.to_array()
    assert data.shape == (1000, len(COLUMN_NAMES))
    assert data[:, 0] == pytest.approx(np.arange(1, 1001) * 0.001)

    contacts = data[:, [COLUMN_NAMES.index(f"{leg}_contact") for leg in ("FR", "FL", "BR", "BL")]]
    assert np.all(np.isin(contacts, (0.0, 1.0)))
    assert np.all(contacts.sum(axis=1) >= 2)
    assert np.all(np.isfinite(data))


@pytest.mark.parametrize("ablation", ["baseline", "fkm", "asc"])
def test_runs_are_deterministic(tmp_path, ablation):
    config = _config(ablation, sim={"duration": 2.0, "seed": 7})
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    run(config).write_csv(str(first))
    run(config).write_csv(str(second))
    assert first.read_bytes() == second.read_bytes()


def test_seed_changes_noise():
    base = _config("baseline", sim={"duration": 1.0, "seed": 1})
    other = with_section(base, "sim", seed=2)
    assert not np.array_equal(run(base).to_array(), run(other).to_array())


def test_fall_is_reported_with_tick():
    config = _config(terrain={"kind": "slope", "slope_pitch_deg": 10.0}, sim={"fall_tilt": 0.05, "duration": 1.0})
    with pytest.raises(FallDetectedError) as excinfo:
        run(config)
    assert excinfo.value.tick >= 1


def test_progress_callback_receives_messages():
    messages = []
    run(_config(sim={"duration": 5.0}), progress_callback=messages.append)
    assert messages == ["t = 5.0 s / 5.0 s"]


def test_progress_is_printed_without_callback(capsys):
    run(_config(sim={"duration": 5.0}))
    assert "[INFO] t = 5.0 s / 5.0 s" in capsys.readouterr().out


def test_true_pose_is_believed_pose_plus_injected_error():
    simulator = SpinSimulator(_config("baseline", sim={"seed": 3}))
    state = simulator.initial_state()
    for _ in range(10):
        state = _advance(simulator, state, 200)
        assert state.position[:2] == pytest.approx(state.believed[:2] + state.injected_error, abs=1e-12)
        assert state.yaw == pytest.approx(state.believed[2], abs=1e-12)
        assert np.hypot(*state.injected_error) <= sum(state.rolling_travel.values()) + 1e-12
    assert np.hypot(*state.injected_error) > 0.0


def test_corrected_ik_keeps_believed_pose_without_noise():
    simulator = SpinSimulator(_config("fkm", sim={"noise_sigma": 0.0}))
    state = _advance(simulator, simulator.initial_state(), 2000)
    assert np.hypot(*state.injected_error) < 1e-6
    assert state.position[:2] == pytest.approx(state.believed[:2], abs=1e-6)
    assert sum(state.rolling_travel.values()) < 1e-6


def test_point_foot_accumulates_no_rolling_travel():
    simulator = SpinSimulator(_config("baseline", geometry={"foot_radius": 0.0}, sim={"noise_sigma": 0.0}))
    state = _advance(simulator, simulator.initial_state(), 1000)
    assert all(travel == 0.0 for travel in state.rolling_travel.values())
    assert np.all(state.injected_error == 0.0)


def test_drift_within_a_step_is_mean_stance_rolling():
    """1歩の間の重心ずれは立脚の Δ 変化の平均（符号反転）に一致する"""
    simulator = SpinSimulator(_config("baseline", sim={"noise_sigma": 0.0}))
    state = _advance(simulator, simulator.initial_state(), 1)
    stance = state.gait.stance_legs
    start_error = state.injected_error.copy()
    start_values = {leg: state.rolling_world[leg].copy() for leg in stance}
    start_travel = {leg: state.rolling_travel[leg] for leg in stance}

    state = _advance(simulator, state, 149)
    assert state.gait.stance_legs == stance

    changes = [state.rolling_world[leg] - start_values[leg] for leg in stance]
    drift = state.injected_error - start_error
    assert drift == pytest.approx(-np.mean(changes, axis=0), abs=1e-12)

    arc_lengths = [state.rolling_travel[leg] - start_travel[leg] for leg in stance]
    for change, arc in zip(changes, arc_lengths):
        assert np.hypot(*change) <= arc + 1e-12
    assert 0.0 < np.hypot(*drift) <= np.mean(arc_lengths) + 1e-12


def test_stance_feet_touch_terrain_and_body_rides_fitted_plane():
    simulator = SpinSimulator(_config(terrain={"kind": "slope"}))
    state = simulator.initial_state()
    for _ in range(10):
        state = _advance(simulator, state, 100)
        x, y = state.position[:2]
        assert state.position[2] == pytest.approx(0.29 + state.plane.height(x, y), abs=1e-12)
        for leg in state.gait.stance_legs:
            foot = state.feet[leg]
            assert foot[2] == pytest.approx(simulator.terrain.height(foot[0], foot[1]), abs=1e-12)


def test_leg_solution_uses_full_body_frame_on_slope():
    simulator = SpinSimulator(_config("baseline", terrain={"kind": "slope"}))
    state = _advance(simulator, simulator.initial_state(), 300)
    rotation = body_rotation(state.yaw, state.pitch, state.roll)
    assert abs(state.pitch) + abs(state.roll) > 0.05

    geom = simulator.geometry
    for leg in state.gait.stance_legs:
        hip = state.position + rotation @ np.array(geom.hip_offset(leg))
        simulator._leg_value(state, leg, hip, rotation)
        ball = hip + rotation @ np.array(forward_kinematics(geom, state.joint_angles[leg]).as_tuple())
        expected = state.feet[leg] + rotation @ np.array([0.0, 0.0, geom.foot_radius])
        assert ball == pytest.approx(expected, abs=1e-9)


def test_stance_leg_outside_joint_limits_is_a_fall():
    config = _config(geometry={"joint_limits": JointLimits(alpha3=(-0.2, -0.1))})
    with pytest.raises(FallDetectedError) as excinfo:
        run(config)
    assert excinfo.value.tick == 1
    assert "joint limits" in excinfo.value.reason


def test_stairs_posture_stays_level_across_a_riser():
    """段鼻をまたいで横向きに立っても姿勢目標は重心直下の踏面に合わせる"""
    config = _config(terrain={"kind": "stairs"}, turn={"initial_yaw": math.pi / 2}, sim={"duration": 2.0})
    simulator = SpinSimulator(config)
    assert abs(simulator.initial_state().plane.a1) > 0.3

    cols = simulator.run().columns("pitch", "roll")
    assert np.all(cols["pitch"] == 0.0)
    assert np.all(cols["roll"] == 0.0)


@pytest.mark.slow
def test_slope_posture_follows_terrain():
    pitch_slope = math.radians(10.0)
    log = run(_config(terrain={"kind": "slope", "slope_pitch_deg": 10.0}, sim={"duration": 3.0}))
    plane = TerrainPlane(0.0, math.tan(pitch_slope), 0.0)
    cols = log.columns("yaw", "pitch", "roll")
    for yaw, pitch, roll in zip(cols["yaw"][::50], cols["pitch"][::50], cols["roll"][::50]):
        assert (pitch, roll) == pytest.approx(posture_target(plane, yaw), abs=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("ablation", ["baseline", "fkm", "asc"])
def test_nominal_spin_completes(ablation):
    config = _config(ablation)
    log = run(config)
    assert log.column("t")[-1] >= 8 * config.gait.cycle_period


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["slope", "stairs"])
def test_rough_terrain_spin_completes(kind):
    config = _config(terrain={"kind": kind})
    log = run(config)
    assert log.column("t")[-1] == pytest.approx(config.run_duration)


@pytest.mark.slow
def test_ablation_ordering_and_boundedness():
    seeds = (1, 2, 3, 4, 5)
    metrics = {
        ablation: [analyze(run(_config(ablation, sim={"seed": seed})), trim_seconds=5.0) for seed in seeds]
        for ablation in ("baseline", "fkm", "asc")
    }
    radius = {ablation: float(np.mean([m.spin_radius for m in values])) for ablation, values in metrics.items()}

    assert radius["baseline"] > 1.1 * radius["fkm"]
    assert radius["fkm"] > 1.1 * radius["asc"]

    for m in metrics["asc"]:
        assert m.trend_ci[0] <= 0.0 <= m.trend_ci[1]
    for m in metrics["baseline"]:
        assert m.trend_slope > 0.0


@pytest.mark.slow
def test_mean_error_grows_with_angular_velocity_on_every_terrain():
    report = SweepRunner(SimConfig(), workers=4).run(
        ["baseline", "asc"],
        seeds=[1, 2, 3, 4, 5],
        omegas=[0.8, 1.0, 1.2],
        terrains=["flat", "slope", "stairs"],
        progress_callback=lambda message: None,
    )
    failed = [c for c in report["cells"] if c["status"] != "ok"]
    assert failed == []

    assert len(report["omega_trend"]) == 6
    for trend in report["omega_trend"]:
        assert trend["nondecreasing"], trend
