"""
地形推定モジュール
直近の接地点から地面の平面を最小二乗で推定し、足場の高さ補正と姿勢目標を計算する。
シミュレータ用の真の地形モデル（平地・斜面・階段）もここで定義
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import DegenerateFitError
from gait_planner import FootholdPlan
from leg_kinematics import LEG_NAMES

Vector3 = Tuple[float, float, float]

SLOPE_LIMIT = math.tan(math.radians(60.0))
MAX_CONDITION = 1e8

TERRAIN_KINDS = ("flat", "slope", "stairs")


@dataclass(frozen=True)
class TerrainPlane:
    """地面平面 z = a0 + a1·x + a2·y"""

    a0: float = 0.0
    a1: float = 0.0
    a2: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(a) for a in (self.a0, self.a1, self.a2)):
            raise ValueError("Plane coefficients must be finite")
        if abs(self.a1) >= SLOPE_LIMIT or abs(self.a2) >= SLOPE_LIMIT:
            raise ValueError(f"Plane slope exceeds 60 degrees: a1={self.a1}, a2={self.a2}")

    def height(self, x: float, y: float) -> float:
        return self.a0 + self.a1 * x + self.a2 * y

    def normal(self) -> Vector3:
        """単位法線ベクトル"""
        n = math.sqrt(1.0 + self.a1 * self.a1 + self.a2 * self.a2)
        return (-self.a1 / n, -self.a2 / n, 1.0 / n)


@dataclass
class ContactHistory:
    """脚ごとの最新接地点（None は無効）"""

    points: Dict[str, Optional[Vector3]] = field(
        default_factory=lambda: {leg: None for leg in LEG_NAMES}
    )

    def update(self, leg: str, point: Vector3):
        if leg not in self.points:
            raise ValueError(f"Unknown leg: {leg}")
        self.points[leg] = tuple(float(c) for c in point)

    def invalidate(self, leg: str):
        self.points[leg] = None

    def valid_points(self) -> List[Vector3]:
        return [p for p in self.points.values() if p is not None]


def fit_plane(history: ContactHistory, max_condition: float = MAX_CONDITION) -> TerrainPlane:
    """
    接地点に最小二乗平面を当てはめる

    a = (WᵀW)⁻¹ Wᵀ z、W = [1 x y]

    Args:
        history: 接地履歴
        max_condition: WᵀW の条件数の上限

    Returns:
        TerrainPlane

    Raises:
        DegenerateFitError: 有効点が3未満、または共線で条件数が大きすぎる
    """
    points = history.valid_points()
    if len(points) < 3:
        raise DegenerateFitError(f"Plane fit needs at least 3 contacts, got {len(points)}")

    pts = np.asarray(points, dtype=float)
    design = np.column_stack([np.ones(len(pts)), pts[:, 0], pts[:, 1]])
    normal_matrix = design.T @ design

    condition = np.linalg.cond(normal_matrix)
    if not np.isfinite(condition) or condition > max_condition:
        raise DegenerateFitError(f"Contacts are (nearly) collinear: cond={condition:.3e}")

    coefficients = np.linalg.solve(normal_matrix, design.T @ pts[:, 2])
    try:
        return TerrainPlane(*(float(a) for a in coefficients))
    except ValueError as e:
        raise DegenerateFitError(str(e)) from e


def remap_foothold(plane: TerrainPlane, plan: FootholdPlan) -> FootholdPlan:
    """
    足場の高さを推定平面に合わせる（z ← a1·x + a2·y + z + a0）

    Args:
        plane: 推定平面
        plan: 平面補正前の足場計画

    Returns:
        補正後の FootholdPlan
    """
    footholds = {
        leg: (x, y, plane.a1 * x + plane.a2 * y + z + plane.a0)
        for leg, (x, y, z) in plan.footholds.items()
    }
    return FootholdPlan(footholds=footholds, shoulders=dict(plan.shoulders))


def posture_target(plane: TerrainPlane, yaw: float = 0.0) -> Tuple[float, float]:
    """
    ボディを地面に平行にする姿勢目標

    傾きはボディの進行方向座標系で評価する（yaw = 0 なら pitch = −atan(a1), roll = atan(a2)）。

    Args:
        plane: 推定平面
        yaw: ボディのヨー角 [rad]

    Returns:
        (pitch, roll) [rad]
    """
    c, s = math.cos(yaw), math.sin(yaw)
    b1 = plane.a1 * c + plane.a2 * s
    b2 = -plane.a1 * s + plane.a2 * c
    pitch = -math.atan(b1)
    roll = math.atan2(b2, math.sqrt(1.0 + b1 * b1))
    return pitch, roll


@dataclass(frozen=True)
class TerrainModel:
    """
    シミュレータ上の真の地形

    Args:
        kind: flat / slope / stairs
        slope_pitch: 斜面の傾き [rad]（+x 方向に上り）
        stair_rise: 階段の蹴上げ [m]
        stair_run: 階段の踏面 [m]
    """

    kind: str = "flat"
    slope_pitch: float = 0.0
    stair_rise: float = 0.05
    stair_run: float = 0.25

    def __post_init__(self):
        if self.kind not in TERRAIN_KINDS:
            raise ValueError(f"Unknown terrain kind: {self.kind}")
        if self.kind == "stairs" and self.stair_run <= 0:
            raise ValueError("stair_run must be positive")

    def height(self, x: float, y: float) -> float:
        if self.kind == "slope":
            return math.tan(self.slope_pitch) * x
        if self.kind == "stairs":
            return self.stair_rise * math.floor(x / self.stair_run)
        return 0.0

    def local_plane(self, x: float, y: float) -> TerrainPlane:
        """(x, y) 直下の局所平面（階段では踏面）"""
        if self.kind == "slope":
            return TerrainPlane(0.0, math.tan(self.slope_pitch), 0.0)
        return TerrainPlane(self.height(x, y), 0.0, 0.0)
