"""
球状足先の転がりモデルと補正逆運動学（FKM）のテスト
"""

import math

import numpy as np
import pytest

from errors import NoConvergenceError
from foot_rolling import (
    USE_COMPLEMENT_PHI,
    contact_pair,
    corrected_inverse_kinematics,
    ideal_foothold,
    real_contact_point,
    rolling_offset,
    solve_corrected_ik,
)
from leg_kinematics import (
    KNEE_BACKWARD,
    HipFramePoint,
    JointAngles,
    LegGeometry,
    forward_kinematics,
    inverse_kinematics,
)

GEOM = LegGeometry()


def _sample_angles(rng, count):
    return [
        JointAngles(a1, a2, a3)
        for a1, a2, a3 in zip(
            rng.uniform(-0.5, 0.5, count),
            rng.uniform(-0.8, 0.8, count),
            rng.uniform(-1.5, -0.3, count),
        )
    ]


def _fixed_point_residual(geom, alpha, ideal):
    real = real_contact_point(geom, alpha)
    dx, dy, dz = rolling_offset(geom, alpha).delta
    return math.sqrt((real.x + dx - ideal.x) ** 2 + (real.y + dy - ideal.y) ** 2 + (real.z + dz - ideal.z) ** 2)


def test_phi_convention_is_zero_for_vertical_calf():
    assert USE_COMPLEMENT_PHI


def test_vertical_calf_has_no_rolling_offset():
    offset = rolling_offset(GEOM, JointAngles(0.0, 0.4, -0.4))
    assert offset.delta == (0.0, 0.0, 0.0)
    assert offset.phi == 0.0


def test_rolling_offset_length_is_radius_times_phi():
    """‖Δ‖ = r·φ（相対 1e−12）、Δz は常に0"""
    rng = np.random.default_rng(3)
    for alpha in _sample_angles(rng, 1000):
        offset = rolling_offset(GEOM, alpha)
        length = math.hypot(offset.delta[0], offset.delta[1])
        assert offset.delta[2] == 0.0
        assert length == pytest.approx(GEOM.foot_radius * offset.phi, rel=1e-12)
        assert 0.0 <= offset.phi <= math.pi


def test_rolling_offset_points_along_calf_projection():
    alpha = JointAngles(0.2, 0.3, -0.6)
    offset = rolling_offset(GEOM, alpha)
    calf_x = math.sin(-0.3)
    calf_y = math.sin(0.2) * math.cos(-0.3)
    cross = offset.delta[0] * calf_y - offset.delta[1] * calf_x
    assert cross == pytest.approx(0.0, abs=1e-15)
    assert offset.delta[0] * calf_x + offset.delta[1] * calf_y > 0
    assert offset.phi == pytest.approx(math.acos(math.cos(0.2) * math.cos(-0.3)), abs=1e-12)


def test_real_contact_is_below_ball_center():
    rng = np.random.default_rng(5)
    for alpha in _sample_angles(rng, 50):
        center = forward_kinematics(GEOM, alpha)
        real = real_contact_point(GEOM, alpha)
        assert real.as_tuple() == pytest.approx(center.shifted(dz=-GEOM.foot_radius).as_tuple(), abs=1e-15)


def test_ideal_minus_real_equals_offset():
    rng = np.random.default_rng(6)
    for alpha in _sample_angles(rng, 50):
        pair = contact_pair(GEOM, alpha)
        dx, dy, dz = rolling_offset(GEOM, alpha).delta
        assert pair.ideal_foothold.x - pair.real_contact.x == pytest.approx(dx, abs=1e-15)
        assert pair.ideal_foothold.y - pair.real_contact.y == pytest.approx(dy, abs=1e-15)
        assert pair.ideal_foothold.z == pair.real_contact.z
        assert ideal_foothold(GEOM, alpha) == pair.ideal_foothold


def test_planar_leg_stays_in_sagittal_plane():
    pair = contact_pair(GEOM, JointAngles(0.0, 0.3, -0.9))
    assert pair.real_contact.y == 0.0
    assert pair.ideal_foothold.y == 0.0


def test_corrected_ik_fixed_point_residual():
    """500 の到達可能な目標で残差 < 1e−7 m"""
    rng = np.random.default_rng(42)
    for alpha in _sample_angles(rng, 500):
        ideal = ideal_foothold(GEOM, alpha)
        solution = solve_corrected_ik(GEOM, ideal, KNEE_BACKWARD)
        assert _fixed_point_residual(GEOM, solution.alpha, ideal) < 1e-7
        assert solution.alpha.as_tuple() == pytest.approx(alpha.as_tuple(), abs=1e-8)
        assert solution.iterations <= 50


def test_point_foot_reduces_to_plain_ik():
    point_foot = LegGeometry(foot_radius=0.0)
    rng = np.random.default_rng(8)
    for alpha in _sample_angles(rng, 100):
        target = forward_kinematics(point_foot, alpha)
        assert corrected_inverse_kinematics(point_foot, target) == inverse_kinematics(point_foot, target)


def test_vertical_calf_target_matches_plain_ik():
    vertical = JointAngles(0.0, 0.4, -0.4)
    ideal = ideal_foothold(GEOM, vertical)
    corrected = corrected_inverse_kinematics(GEOM, ideal)
    plain = inverse_kinematics(GEOM, ideal.shifted(dz=GEOM.foot_radius))
    assert corrected.as_tuple() == pytest.approx(plain.as_tuple(), abs=1e-12)
    assert rolling_offset(GEOM, corrected).phi == pytest.approx(0.0, abs=1e-9)


def test_correction_shrinks_with_foot_radius():
    """r → 0 で補正量が単調に減り、r に比例して抑えられる"""
    target = HipFramePoint(0.06, -0.04, -0.30)
    deviations = []
    for radius in (0.02, 0.01, 0.005, 0.0025):
        geom = LegGeometry(foot_radius=radius)
        corrected = np.array(corrected_inverse_kinematics(geom, target).as_tuple())
        plain = np.array(inverse_kinematics(geom, target.shifted(dz=radius)).as_tuple())
        deviation = float(np.max(np.abs(corrected - plain)))
        assert deviation < 10.0 * radius
        deviations.append(deviation)
    assert all(b < a for a, b in zip(deviations, deviations[1:]))


def test_no_convergence_with_one_iteration():
    ideal = ideal_foothold(GEOM, JointAngles(0.2, 0.3, -0.9))
    with pytest.raises(NoConvergenceError):
        solve_corrected_ik(GEOM, ideal, max_iterations=1)


def test_warm_start_needs_fewer_iterations():
    ideal = ideal_foothold(GEOM, JointAngles(0.2, 0.3, -0.9))
    cold = solve_corrected_ik(GEOM, ideal)
    warm = solve_corrected_ik(GEOM, ideal, initial_offset=cold.offset)
    assert warm.iterations < cold.iterations
    assert warm.alpha.as_tuple() == pytest.approx(cold.alpha.as_tuple(), abs=1e-12)


def test_spin_step_contact_drift_with_and_without_correction():
    """
    1歩分のヨー回転で、固定接地点に対する接地点のずれを比較
    補正ありは 1e−6 m 未満、補正なしは正
    """
    foot_world = np.array([0.19, -0.05, -0.30])
    hip_body = np.array([0.19, -0.05, 0.0])
    gamma = 0.7 * 0.2

    corrected_drift = 0.0
    plain_offsets = []
    for psi in np.linspace(0.0, gamma, 201):
        c, s = math.cos(psi), math.sin(psi)
        hip = np.array([c * hip_body[0] - s * hip_body[1], s * hip_body[0] + c * hip_body[1], 0.0])
        rx, ry, rz = foot_world - hip
        local = HipFramePoint(c * rx + s * ry, -s * rx + c * ry, rz)

        solution = solve_corrected_ik(GEOM, local)
        corrected_drift = max(corrected_drift, math.hypot(*solution.residual[:2]))

        alpha = inverse_kinematics(GEOM, local.shifted(dz=GEOM.foot_radius))
        plain_offsets.append(np.array(rolling_offset(GEOM, alpha).delta[:2]))

    plain_drift = max(np.hypot(*(d - plain_offsets[0])) for d in plain_offsets)
    assert corrected_drift < 1e-6
    assert plain_drift > 0.0
