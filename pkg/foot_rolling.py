"""
球状足先の転がりモデル
足先球が転がることで接地点が移動する量 Δ を計算し、
理想接地点に実接地点を合わせるための補正逆運動学（FKM）を提供
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from errors import NoConvergenceError
from leg_kinematics import (
    KNEE_BACKWARD,
    HipFramePoint,
    JointAngles,
    LegGeometry,
    forward_kinematics,
    inverse_kinematics,
)

Vector3 = Tuple[float, float, float]


def _printed_phi(vertical_component: float) -> float:
    return math.acos(max(-1.0, min(1.0, -vertical_component)))


def _calibrate_phi_convention() -> bool:
    """
    下腿が鉛直（c1·c23 = 1）のとき φ = 0 となる規約を選ぶ

    Returns:
        True なら arccos(−c1·c23) の補角を使う
    """
    return _printed_phi(1.0) != 0.0


# 起動時に一度だけ決定
USE_COMPLEMENT_PHI = _calibrate_phi_convention()


@dataclass(frozen=True)
class RollingOffset:
    """転がりによる接地点の水平移動量"""

    delta: Vector3
    phi: float


@dataclass(frozen=True)
class ContactPair:
    """実接地点と理想接地点の組"""

    real_contact: HipFramePoint
    ideal_foothold: HipFramePoint


@dataclass(frozen=True)
class FkmSolution:
    """補正逆運動学の解"""

    alpha: JointAngles
    residual: Vector3
    offset: Vector3
    iterations: int


def rolling_offset(geom: LegGeometry, alpha: JointAngles) -> RollingOffset:
    """
    転がりオフセット Δ を計算

    Δ の向きは下腿軸の水平投影、大きさは r·φ（φ は下腿と鉛直のなす角）。

    Args:
        geom: 脚の幾何パラメータ
        alpha: 関節角度

    Returns:
        RollingOffset（delta.z は常に0）
    """
    a1, a2, a3 = alpha.as_tuple()
    s1, c1 = math.sin(a1), math.cos(a1)
    s23, c23 = math.sin(a2 + a3), math.cos(a2 + a3)

    hx = s23
    hy = s1 * c23
    horizontal = math.hypot(hx, hy)
    vertical = c1 * c23

    if USE_COMPLEMENT_PHI:
        phi = math.atan2(horizontal, vertical)
    else:
        phi = math.atan2(horizontal, -vertical)

    if horizontal == 0.0:
        return RollingOffset((0.0, 0.0, 0.0), phi)

    scale = geom.foot_radius * phi / horizontal
    return RollingOffset((scale * hx, scale * hy, 0.0), phi)


def real_contact_point(geom: LegGeometry, alpha: JointAngles) -> HipFramePoint:
    """
    実接地点（球中心の真下、半径 r だけ下）

    Args:
        geom: 脚の幾何パラメータ
        alpha: 関節角度

    Returns:
        股関節座標系での実接地点
    """
    return forward_kinematics(geom, alpha).shifted(dz=-geom.foot_radius)


def ideal_foothold(geom: LegGeometry, alpha: JointAngles) -> HipFramePoint:
    """理想接地点 = 実接地点 + Δ"""
    dx, dy, dz = rolling_offset(geom, alpha).delta
    return real_contact_point(geom, alpha).shifted(dx, dy, dz)


def contact_pair(geom: LegGeometry, alpha: JointAngles) -> ContactPair:
    real = real_contact_point(geom, alpha)
    dx, dy, dz = rolling_offset(geom, alpha).delta
    return ContactPair(real_contact=real, ideal_foothold=real.shifted(dx, dy, dz))


def solve_corrected_ik(
    geom: LegGeometry,
    ideal: HipFramePoint,
    knee_branch: int = KNEE_BACKWARD,
    tolerance: float = 1e-12,
    max_iterations: int = 50,
    initial_offset: Optional[Vector3] = None
) -> FkmSolution:
    """
    補正逆運動学を不動点反復で解く

    α_{k+1} = IK(ideal + r·ẑ − Δ(α_k))。初期値は Δ = 0 の閉形式解
    （initial_offset を与えた場合はそれを初期 Δ とする）。

    Args:
        geom: 脚の幾何パラメータ
        ideal: 理想接地点（股関節座標系）
        knee_branch: 膝の分岐
        tolerance: 残差の許容値 [m]
        max_iterations: 最大反復回数
        initial_offset: 初期 Δ（前ティックの値を使うと反復が減る）

    Returns:
        FkmSolution

    Raises:
        UnreachableError: 目標点が到達範囲外
        NoConvergenceError: max_iterations 以内に収束しない
    """
    r = geom.foot_radius
    ox, oy, _ = initial_offset if initial_offset is not None else (0.0, 0.0, 0.0)
    target = ideal.shifted(-ox, -oy, r)
    alpha = inverse_kinematics(geom, target, knee_branch)

    for iteration in range(1, max_iterations + 1):
        dx, dy, _ = rolling_offset(geom, alpha).delta
        foot = forward_kinematics(geom, alpha)
        residual = (
            foot.x + dx - ideal.x,
            foot.y + dy - ideal.y,
            foot.z - r - ideal.z,
        )
        if math.sqrt(sum(c * c for c in residual)) <= tolerance:
            return FkmSolution(
                alpha=alpha, residual=residual, offset=(dx, dy, 0.0), iterations=iteration
            )
        alpha = inverse_kinematics(geom, ideal.shifted(-dx, -dy, r), knee_branch)

    raise NoConvergenceError(
        f"Corrected IK did not converge within {max_iterations} iterations"
    )


def corrected_inverse_kinematics(
    geom: LegGeometry,
    ideal: HipFramePoint,
    knee_branch: int = KNEE_BACKWARD,
    tolerance: float = 1e-12,
    max_iterations: int = 50
) -> JointAngles:
    """
    理想接地点に実接地点が一致する関節角度を返す（FKM）

    r = 0 のときは通常の逆運動学と完全に一致する。
    """
    return solve_corrected_ik(geom, ideal, knee_branch, tolerance, max_iterations).alpha
