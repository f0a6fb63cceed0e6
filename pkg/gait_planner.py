"""
トロット歩容と旋回・スピン用の足場計画モジュール
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

from leg_kinematics import LEG_NAMES, LegGeometry

Vector3 = Tuple[float, float, float]

# 対角ペア (FR, BL) と (FL, BR) は半周期ずれる
PHASE_OFFSETS: Dict[str, float] = {"FR": 0.0, "BL": 0.0, "FL": 0.5, "BR": 0.5}

# 半周期境界へのスナップ幅（周期単位）
BOUNDARY_SNAP = 1e-9


@dataclass(frozen=True)
class GaitState:
    """
    歩容の状態（不変）

    phase と stance は LEG_NAMES の順に並ぶ。
    """

    phase: Tuple[float, float, float, float]
    stance: Tuple[bool, bool, bool, bool]
    cycle_period: float = 0.4
    duty_factor: float = 0.5
    step_index: int = 0
    elapsed: float = 0.0

    def phase_of(self, leg: str) -> float:
        return self.phase[LEG_NAMES.index(leg)]

    def is_stance(self, leg: str) -> bool:
        return self.stance[LEG_NAMES.index(leg)]

    @property
    def stance_legs(self) -> Tuple[str, ...]:
        return tuple(leg for leg, s in zip(LEG_NAMES, self.stance) if s)

    @property
    def swing_legs(self) -> Tuple[str, ...]:
        return tuple(leg for leg, s in zip(LEG_NAMES, self.stance) if not s)

    @property
    def step_duration(self) -> float:
        return step_duration(self.cycle_period, self.duty_factor)

    def stance_progress(self, leg: str) -> float:
        """立脚期内の正規化進捗 [0, 1)（遊脚中は 0）"""
        if not self.is_stance(leg):
            return 0.0
        return self.phase_of(leg) / self.duty_factor

    def swing_progress(self, leg: str) -> float:
        """遊脚期内の正規化進捗 [0, 1)（立脚中は 0）"""
        if self.is_stance(leg):
            return 0.0
        return (self.phase_of(leg) - self.duty_factor) / (1.0 - self.duty_factor)


@dataclass(frozen=True)
class TurnCommand:
    """
    旋回指令

    Args:
        radius: 旋回半径 R [m]（0 ならその場スピン）
        angular_velocity: 角速度 ω [rad/s]
        yaw_increment: 1歩あたりのヨー増分 γ [rad]
    """

    radius: float
    angular_velocity: float
    yaw_increment: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("Turn radius must be non-negative")

    @classmethod
    def for_step(cls, radius: float, angular_velocity: float, duration: float) -> "TurnCommand":
        return cls(radius, angular_velocity, angular_velocity * duration)

    @property
    def is_spin(self) -> bool:
        return self.radius == 0.0


@dataclass(frozen=True)
class FootholdPlan:
    """脚ごとの指令足場と、その基準となる股関節投影点（ワールド座標）"""

    footholds: Dict[str, Vector3]
    shoulders: Dict[str, Vector3]

    @property
    def legs(self) -> Tuple[str, ...]:
        return tuple(self.footholds)


def step_duration(cycle_period: float, duty_factor: float) -> float:
    """1歩の時間 T_s = T × duty"""
    return cycle_period * duty_factor


def _state_at(elapsed: float, cycle_period: float, duty_factor: float) -> GaitState:
    cycles = elapsed / cycle_period
    half_cycles = 2.0 * cycles
    nearest = round(half_cycles)
    if abs(half_cycles - nearest) < BOUNDARY_SNAP:
        half_cycles = float(nearest)
        cycles = half_cycles / 2.0

    base = cycles % 1.0
    phases = tuple((base + PHASE_OFFSETS[leg]) % 1.0 for leg in LEG_NAMES)
    # 境界ちょうどは次のモードに入る
    stance = tuple(p < duty_factor for p in phases)
    return GaitState(
        phase=phases,
        stance=stance,
        cycle_period=cycle_period,
        duty_factor=duty_factor,
        step_index=int(math.floor(half_cycles)),
        elapsed=elapsed,
    )


def initial_gait_state(cycle_period: float = 0.4, duty_factor: float = 0.5) -> GaitState:
    """FR・BL が立脚期の開始点にある初期状態"""
    if cycle_period <= 0:
        raise ValueError("cycle_period must be positive")
    if not 0.0 < duty_factor < 1.0:
        raise ValueError("duty_factor must be in (0, 1)")
    return _state_at(0.0, cycle_period, duty_factor)


def advance_phase(state: GaitState, dt: float) -> GaitState:
    """
    歩容を dt だけ進める

    Args:
        state: 現在の歩容状態
        dt: 時間刻み [s]

    Returns:
        新しい GaitState
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return _state_at(state.elapsed + dt, state.cycle_period, state.duty_factor)


def translation_step(turn: TurnCommand) -> Vector3:
    """円弧移動による並進量 Δl_t = (R sin γ, R(1 − cos γ), 0)"""
    gamma = turn.yaw_increment
    return (turn.radius * math.sin(gamma), turn.radius * (1.0 - math.cos(gamma)), 0.0)


def rotation_step(geom: LegGeometry, leg: str, gamma: float) -> Vector3:
    """
    ボディ回転 γ 後の股関節位置（ボディ座標系）

    股関節オフセットを γ だけ回転させたもの。
    """
    hx, hy, _ = geom.hip_offset(leg)
    c, s = math.cos(gamma), math.sin(gamma)
    return (c * hx - s * hy, s * hx + c * hy, 0.0)


def hip_projections(
    geom: LegGeometry,
    body_xy: Tuple[float, float],
    yaw: float,
    ground_z: float = 0.0,
    legs: Iterable[str] = LEG_NAMES
) -> Dict[str, Vector3]:
    """
    各股関節の鉛直投影点（ワールド座標）

    Args:
        geom: 幾何パラメータ
        body_xy: ボディ中心の xy [m]
        yaw: ボディのヨー角 [rad]
        ground_z: 投影先の基準高さ [m]
        legs: 対象の脚

    Returns:
        脚名 → 投影点
    """
    c, s = math.cos(yaw), math.sin(yaw)
    projections = {}
    for leg in legs:
        hx, hy, _ = geom.hip_offset(leg)
        projections[leg] = (body_xy[0] + c * hx - s * hy, body_xy[1] + s * hx + c * hy, ground_z)
    return projections


def plan_footholds(
    geom: LegGeometry,
    turn: TurnCommand,
    shoulders: Dict[str, Vector3],
    body_yaw: float = 0.0
) -> FootholdPlan:
    """
    旋回指令から次の足場を計画

    P_f,cmd = P_shoulder + R_z(ψ)·(Δl_t + Rot(γ)h − h)。
    毎歩ボディ座標系を取り直す（段階的計画）。

    Args:
        geom: 幾何パラメータ
        turn: 旋回指令
        shoulders: 脚ごとの現在の股関節投影点（ワールド座標）
        body_yaw: 現在のボディヨー角 [rad]

    Returns:
        FootholdPlan
    """
    tx, ty, _ = translation_step(turn)
    c, s = math.cos(body_yaw), math.sin(body_yaw)
    footholds = {}
    for leg, (px, py, pz) in shoulders.items():
        hx, hy, _ = geom.hip_offset(leg)
        rx, ry, _ = rotation_step(geom, leg, turn.yaw_increment)
        dx = tx + rx - hx
        dy = ty + ry - hy
        footholds[leg] = (px + c * dx - s * dy, py + s * dx + c * dy, pz)
    return FootholdPlan(footholds=footholds, shoulders=dict(shoulders))


def swing_position(
    liftoff: Vector3,
    touchdown: Vector3,
    progress: float,
    apex_height: float = 0.04,
    ground_z: Optional[float] = None
) -> Vector3:
    """
    遊脚の足先位置（半サイクロイド補間）

    Args:
        liftoff: 離地点
        touchdown: 着地点
        progress: 遊脚期内の進捗 [0, 1]
        apex_height: 最高点の高さ [m]
        ground_z: 高さの基準（省略時は離地・着地の線形補間）

    Returns:
        足先位置
    """
    p = min(max(progress, 0.0), 1.0)
    blend = (2.0 * math.pi * p - math.sin(2.0 * math.pi * p)) / (2.0 * math.pi)
    lift = apex_height * math.sin(math.pi * p)
    base_z = liftoff[2] + (touchdown[2] - liftoff[2]) * blend if ground_z is None else ground_z
    return (
        liftoff[0] + (touchdown[0] - liftoff[0]) * blend,
        liftoff[1] + (touchdown[1] - liftoff[1]) * blend,
        base_z + lift,
    )
