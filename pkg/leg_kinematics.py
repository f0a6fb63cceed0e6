"""
脚の運動学モジュール
3自由度ポイントフット脚の順運動学・逆運動学と、全モジュール共通の座標系を定義

座標系: 股関節ルート座標系で x 前方、y 左方、z 上方（足先は z < 0）
脚の順序: FR, FL, BR, BL
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

from errors import SingularError, UnreachableError

LEG_NAMES: Tuple[str, ...] = ("FR", "FL", "BR", "BL")
DIAGONAL_PAIRS: Tuple[Tuple[str, str], ...] = (("FR", "BL"), ("FL", "BR"))

KNEE_BACKWARD = -1
KNEE_FORWARD = 1

# 到達距離の丸め許容
REACH_TOLERANCE = 1e-12
SINGULAR_TOLERANCE = 1e-12

Vector3 = Tuple[float, float, float]


@dataclass(frozen=True)
class JointLimits:
    """関節角度の可動範囲 [rad]"""

    alpha1: Tuple[float, float] = (-0.8, 0.8)
    alpha2: Tuple[float, float] = (-1.5, 1.5)
    alpha3: Tuple[float, float] = (-2.6, -0.1)

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"Joint limit {name} must satisfy lo < hi, got ({lo}, {hi})")

    def contains(self, alpha: "JointAngles") -> bool:
        """関節角度が可動範囲内かどうか"""
        return all(
            lo <= value <= hi
            for value, (lo, hi) in zip(alpha.as_tuple(), (self.alpha1, self.alpha2, self.alpha3))
        )


@dataclass(frozen=True)
class LegGeometry:
    """
    脚とボディの幾何パラメータ

    Args:
        l_thigh: 大腿リンク長 L2 [m]
        l_calf: 下腿リンク長 L3 [m]
        foot_radius: 球状足先の半径 r [m]
        body_length: 前後の股関節間距離 L [m]
        body_width: 左右の股関節間距離 W [m]
        joint_limits: 関節可動範囲
    """

    l_thigh: float = 0.215
    l_calf: float = 0.20
    foot_radius: float = 0.0225
    body_length: float = 0.38
    body_width: float = 0.10
    joint_limits: JointLimits = field(default_factory=JointLimits)

    def __post_init__(self):
        if not (self.l_thigh > 0 and self.l_calf > 0):
            raise ValueError("Link lengths must be positive")
        if not 0 <= self.foot_radius < self.l_calf:
            raise ValueError("foot_radius must satisfy 0 <= r < l_calf")
        if self.body_length <= 0:
            raise ValueError("body_length must be positive")

    @property
    def max_reach(self) -> float:
        return self.l_thigh + self.l_calf

    @property
    def min_reach(self) -> float:
        return abs(self.l_thigh - self.l_calf)

    def hip_offset(self, leg: str) -> Vector3:
        """
        ボディ中心から股関節までのオフセット（ボディ座標系）

        Args:
            leg: 脚名（FR, FL, BR, BL）

        Returns:
            (x, y, 0) [m]
        """
        if leg not in LEG_NAMES:
            raise ValueError(f"Unknown leg: {leg}")
        sx = 1.0 if leg[0] == "F" else -1.0
        sy = -1.0 if leg[1] == "R" else 1.0
        return (sx * self.body_length / 2, sy * self.body_width / 2, 0.0)

    @property
    def hip_offset_per_leg(self) -> Dict[str, Vector3]:
        return {leg: self.hip_offset(leg) for leg in LEG_NAMES}


@dataclass(frozen=True)
class JointAngles:
    """関節角度 α = (α1: 股関節内外転, α2: 大腿ピッチ, α3: 膝) [rad]"""

    alpha1: float
    alpha2: float
    alpha3: float

    def __post_init__(self):
        if not all(math.isfinite(a) for a in self.as_tuple()):
            raise ValueError(f"Joint angles must be finite: {self.as_tuple()}")

    @property
    def knee_branch(self) -> int:
        return KNEE_BACKWARD if self.alpha3 < 0 else KNEE_FORWARD

    def as_tuple(self) -> Vector3:
        return (self.alpha1, self.alpha2, self.alpha3)


@dataclass(frozen=True)
class HipFramePoint:
    """股関節ルート座標系の点 [m]"""

    x: float
    y: float
    z: float

    def as_tuple(self) -> Vector3:
        return (self.x, self.y, self.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def shifted(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0) -> "HipFramePoint":
        return HipFramePoint(self.x + dx, self.y + dy, self.z + dz)


def forward_kinematics(geom: LegGeometry, alpha: JointAngles) -> HipFramePoint:
    """
    順運動学: 関節角度から足先参照点の位置を計算

    Args:
        geom: 脚の幾何パラメータ
        alpha: 関節角度

    Returns:
        股関節座標系での足先参照点（ポイントフット）
    """
    a1, a2, a3 = alpha.as_tuple()
    s1, c1 = math.sin(a1), math.cos(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    s23, c23 = math.sin(a2 + a3), math.cos(a2 + a3)

    # 矢状面内での脚の下向き成分
    reach = geom.l_thigh * c2 + geom.l_calf * c23
    x = geom.l_thigh * s2 + geom.l_calf * s23
    return HipFramePoint(x, s1 * reach, -c1 * reach)


def inverse_kinematics(
    geom: LegGeometry,
    target: HipFramePoint,
    knee_branch: int = KNEE_BACKWARD
) -> JointAngles:
    """
    逆運動学: 足先参照点から関節角度を解析的に求める

    股関節ロールを取り除いた後、矢状面の2リンク問題として解く。

    Args:
        geom: 脚の幾何パラメータ
        target: 股関節座標系での目標点
        knee_branch: 膝の分岐（KNEE_BACKWARD: α3 < 0, KNEE_FORWARD: α3 > 0）

    Returns:
        関節角度

    Raises:
        UnreachableError: 目標点が到達範囲 [|L2−L3|, L2+L3] の外
        SingularError: 目標点が股関節ロール軸上（y = z = 0）
    """
    if knee_branch not in (KNEE_BACKWARD, KNEE_FORWARD):
        raise ValueError(f"knee_branch must be ±1, got {knee_branch}")

    x, y, z = target.as_tuple()
    rho = math.sqrt(x * x + y * y + z * z)
    l2, l3 = geom.l_thigh, geom.l_calf

    if rho > geom.max_reach + REACH_TOLERANCE or rho < geom.min_reach - REACH_TOLERANCE:
        raise UnreachableError(
            f"Target distance {rho:.6f} m outside [{geom.min_reach:.6f}, {geom.max_reach:.6f}]"
        )

    sagittal = math.hypot(y, z)
    if sagittal < SINGULAR_TOLERANCE:
        raise SingularError("Target lies on the hip roll axis; alpha1 is undefined")

    alpha1 = math.atan2(y, -z)

    # 半角公式: 伸展付近でも桁落ちしない
    outer = max((geom.max_reach - rho) * (geom.max_reach + rho), 0.0)
    inner = max((rho - geom.min_reach) * (rho + geom.min_reach), 0.0)
    alpha3 = knee_branch * 2.0 * math.atan2(math.sqrt(outer), math.sqrt(inner))

    alpha2 = math.atan2(x, sagittal) - math.atan2(
        l3 * math.sin(alpha3), l2 + l3 * math.cos(alpha3)
    )
    alpha2 = math.remainder(alpha2, 2.0 * math.pi)

    return JointAngles(alpha1, alpha2, alpha3)
