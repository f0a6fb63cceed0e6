"""
スピン歩行の運動学シミュレータ

指令された運動をそのまま実現する理想追従プラントに、
球状足先の転がり誤差と着地ノイズを注入して閉ループで実行する
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from com_planner import ComReference, DistributionParams, desired_com, interpolate_com
from errors import DegenerateFitError, FallDetectedError, KinematicsError
from foot_rolling import rolling_offset, solve_corrected_ik
from gait_planner import (
    GaitState,
    TurnCommand,
    advance_phase,
    hip_projections,
    initial_gait_state,
    plan_footholds,
    step_duration,
    swing_position,
    translation_step,
)
from leg_kinematics import (
    DIAGONAL_PAIRS,
    LEG_NAMES,
    HipFramePoint,
    JointAngles,
    inverse_kinematics,
)
from lqr_tracker import ControlInput, LqrTracker, SpinPoint, circle_path, goal_point
from run_config import SimConfig, validate_config
from terrain_estimator import (
    ContactHistory,
    TerrainModel,
    TerrainPlane,
    fit_plane,
    posture_target,
    remap_foothold,
)
from trajectory_log import TrajectoryLog

# 着地ノイズの基準角速度 [rad/s]
NOISE_REFERENCE_OMEGA = 0.7


@dataclass
class PlantState:
    """
    プラントの状態（シミュレーションループが所有）

    position は真の重心、believed は指令変位の積算（推測航法）。
    rolling_world は立脚ごとの前ティックの Δ（FKM有効時は残差）をワールド座標で保持する。
    """

    tick: int
    time: float
    position: np.ndarray
    yaw: float
    roll: float
    pitch: float
    believed: np.ndarray
    gait: GaitState
    feet: Dict[str, np.ndarray]
    contacts: Dict[str, bool]
    history: ContactHistory
    plane: TerrainPlane
    joint_angles: Dict[str, Optional[JointAngles]] = field(default_factory=dict)
    rolling_world: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)
    rolling_offsets: Dict[str, Optional[Tuple[float, float, float]]] = field(default_factory=dict)
    rolling_travel: Dict[str, float] = field(default_factory=dict)
    swing_start: Dict[str, np.ndarray] = field(default_factory=dict)
    swing_target: Dict[str, np.ndarray] = field(default_factory=dict)
    com_reference: Optional[ComReference] = None
    com_sample: int = 0
    command: Optional[ControlInput] = None
    injected_error: np.ndarray = field(default_factory=lambda: np.zeros(2))
    touchdowns: int = 0


def body_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """ZYX順の回転行列 R = Rz(yaw)·Ry(pitch)·Rx(roll)"""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def _notify_progress(callback: Optional[Callable], message: str):
    if callback:
        callback(message)
    else:
        print(f"[INFO] {message}")


class SpinSimulator:
    """
    ASCパイプラインを1ティックずつ実行するシミュレータ

    Args:
        config: 実行設定
        progress_callback: 進捗通知用コールバック関数
    """

    def __init__(self, config: SimConfig, progress_callback: Optional[Callable] = None):
        self.config = validate_config(config)
        self.geometry = config.geometry
        self.progress_callback = progress_callback

        self.terrain = TerrainModel(
            kind=config.terrain.kind,
            slope_pitch=math.radians(config.terrain.slope_pitch_deg),
            stair_rise=config.terrain.stair_rise,
            stair_run=config.terrain.stair_run,
        )
        self.distribution = DistributionParams(config.psp.distribution, config.psp.sigma)
        self.step_time = step_duration(config.gait.cycle_period, config.gait.duty)
        self.turn = TurnCommand.for_step(config.turn.radius, config.turn.omega, self.step_time)

        if self.turn.is_spin:
            self.reference = SpinPoint(tuple(config.turn.center), config.turn.omega, config.turn.initial_yaw)
        else:
            self.reference = circle_path(
                tuple(config.turn.center),
                config.turn.initial_yaw,
                config.turn.radius,
                config.turn.omega * config.turn.radius,
            )

        self.tracker: Optional[LqrTracker] = None
        if config.lqr.enabled:
            self.tracker = LqrTracker(
                q_diag=config.lqr.q_diag,
                r_diag=config.lqr.r_diag,
                dt=config.lqr.dt,
                variant=config.lqr.b_variant,
                vr_floor=config.lqr.vr_floor,
                v_max=config.lqr.v_max,
                omega_max=config.lqr.omega_max,
                wheelbase=self.geometry.body_length,
            )

        self.noise_sigma = config.sim.noise_sigma
        if config.sim.noise_travel_scaling and self.noise_sigma > 0:
            nominal = self.swing_travel(NOISE_REFERENCE_OMEGA)
            if nominal > 0:
                self.noise_sigma *= self.swing_travel(config.turn.omega) / nominal

        self.rng = np.random.default_rng(config.sim.seed)

    def swing_travel(self, omega: float) -> float:
        """
        定常旋回での遊脚の移動距離（FR脚、2歩分のヨー変化）

        Args:
            omega: 角速度 [rad/s]

        Returns:
            移動距離 [m]
        """
        gamma = 2.0 * omega * self.step_time
        turn = TurnCommand(self.config.turn.radius, omega, gamma)
        tx, ty, _ = translation_step(turn)
        hx, hy, _ = self.geometry.hip_offset("FR")
        c, s = math.cos(gamma), math.sin(gamma)
        return math.hypot(tx + c * hx - s * hy - hx, ty + s * hx + c * hy - hy)

    def reference_input(self) -> Tuple[float, float]:
        """参照入力 u_r = (v_r, ω_r)"""
        omega = self.config.turn.omega
        return (omega * self.config.turn.radius, omega)

    def initial_state(self) -> PlantState:
        """
        初期状態: 4脚とも股関節の真下に接地し、FL・BR が離地する直前
        """
        cfg = self.config
        cx, cy = cfg.turn.center
        yaw = cfg.turn.initial_yaw

        history = ContactHistory()
        feet = {}
        for leg, (x, y, _) in hip_projections(self.geometry, (cx, cy), yaw).items():
            contact = np.array([x, y, self.terrain.height(x, y)])
            feet[leg] = contact
            history.update(leg, contact)

        try:
            plane = fit_plane(history)
        except DegenerateFitError:
            plane = TerrainPlane()

        pitch, roll = posture_target(self._posture_plane(plane, cx, cy), yaw)
        state = PlantState(
            tick=0,
            time=0.0,
            position=np.array([cx, cy, cfg.psp.standing_height + plane.height(cx, cy)]),
            yaw=yaw,
            roll=roll,
            pitch=pitch,
            believed=np.array([cx, cy, yaw]),
            gait=initial_gait_state(cfg.gait.cycle_period, cfg.gait.duty),
            feet=feet,
            contacts={leg: True for leg in LEG_NAMES},
            history=history,
            plane=plane,
            joint_angles={leg: None for leg in LEG_NAMES},
            rolling_world={leg: None for leg in LEG_NAMES},
            rolling_offsets={leg: None for leg in LEG_NAMES},
            rolling_travel={leg: 0.0 for leg in LEG_NAMES},
        )
        self._on_touchdown(state)
        return state

    def _on_touchdown(self, state: PlantState):
        """
        歩の切り替え: 着地・平面推定・足場計画・PSP・LQRゲイン更新
        """
        cfg = self.config
        gait = state.gait
        state.touchdowns += 1

        for leg in gait.stance_legs:
            if state.contacts[leg]:
                continue
            noise = self.rng.standard_normal(2) * self.noise_sigma
            x, y = state.swing_target[leg][:2] + noise
            contact = np.array([x, y, self.terrain.height(x, y)])
            state.feet[leg] = contact
            state.contacts[leg] = True
            state.history.update(leg, contact)
            state.rolling_world[leg] = None
            state.rolling_offsets[leg] = None

        for leg in gait.swing_legs:
            if state.contacts[leg]:
                state.contacts[leg] = False
                state.swing_start[leg] = state.feet[leg].copy()
                state.rolling_world[leg] = None
                state.rolling_offsets[leg] = None
                state.joint_angles[leg] = None

        try:
            state.plane = fit_plane(state.history)
        except DegenerateFitError:
            pass

        x, y = state.position[:2]
        shoulders = hip_projections(self.geometry, (x, y), state.yaw, legs=gait.swing_legs)
        plan = remap_foothold(state.plane, plan_footholds(self.geometry, self.turn, shoulders, state.yaw))
        for leg, foothold in plan.footholds.items():
            state.swing_target[leg] = np.array(foothold)

        feet = {leg: tuple(state.feet[leg]) for leg in LEG_NAMES}
        target = desired_com(feet, gait, self.distribution, cfg.psp.standing_height, state.plane)
        state.com_reference = interpolate_com(state.position, target, cfg.gait.cycle_period, cfg.sim.dt)
        state.com_sample = 0

        if self.tracker is not None:
            goal = goal_point(self.reference, (x, y), state.time)
            self.tracker.relinearize(goal.heading, goal.speed)

    def _posture_plane(self, plane: TerrainPlane, x: float, y: float) -> TerrainPlane:
        """姿勢目標に使う平面（階段では重心直下の踏面、それ以外は推定平面）"""
        if self.terrain.kind == "stairs":
            return self.terrain.local_plane(x, y)
        return plane

    def _command(self, state: PlantState) -> ControlInput:
        v_r, omega_r = self.reference_input()
        if self.tracker is None:
            return ControlInput(v=v_r, second=omega_r, omega=omega_r,
                                reference=(v_r, omega_r), correction=(0.0, 0.0))

        goal = goal_point(self.reference, (state.position[0], state.position[1]), state.time)
        pose = np.array([state.position[0], state.position[1], state.yaw])
        reference_pose = np.array([goal.point[0], goal.point[1], goal.heading])
        if self.tracker.variant == "as_printed":
            return self.tracker.command(pose, reference_pose, (v_r, 0.0), reference_omega=omega_r)
        return self.tracker.command(pose, reference_pose, (v_r, omega_r))

    def _leg_value(self, state: PlantState, leg: str, hip: np.ndarray, rotation: np.ndarray) -> np.ndarray:
        """
        立脚1本の関節角度を解き、ワールド座標の Δ（FKM有効時は残差）を返す

        足先は胴体の回転 rotation（ヨー・ピッチ・ロール）で股関節座標系に移す。
        """
        geom = self.geometry
        local = HipFramePoint(*(float(v) for v in rotation.T @ (state.feet[leg] - hip)))

        try:
            if self.config.fkm.enabled:
                solution = solve_corrected_ik(
                    geom,
                    local,
                    tolerance=self.config.fkm.tolerance,
                    max_iterations=self.config.fkm.max_iterations,
                    initial_offset=state.rolling_offsets[leg],
                )
                alpha = solution.alpha
                state.rolling_offsets[leg] = solution.offset
                value = solution.residual
            else:
                alpha = inverse_kinematics(geom, local.shifted(dz=geom.foot_radius))
                value = rolling_offset(geom, alpha).delta
        except KinematicsError as e:
            raise FallDetectedError(state.tick, f"leg {leg} out of reach: {e}") from e

        if not geom.joint_limits.contains(alpha):
            raise FallDetectedError(state.tick, f"leg {leg} outside joint limits: {alpha.as_tuple()}")

        state.joint_angles[leg] = alpha
        return (rotation @ np.asarray(value, dtype=float))[:2]

    def _rolling_error(self, state: PlantState) -> np.ndarray:
        """
        立脚の転がりによる重心誤差 e = −(立脚平均の Δ 増分)
        """
        rotation = body_rotation(state.yaw, state.pitch, state.roll)
        increments = []
        for leg in state.gait.stance_legs:
            hip = state.position + rotation @ np.array(self.geometry.hip_offset(leg))
            value = self._leg_value(state, leg, hip, rotation)
            previous = state.rolling_world[leg]
            if previous is not None:
                increment = value - previous
                increments.append(increment)
                state.rolling_travel[leg] += float(np.hypot(*increment))
            state.rolling_world[leg] = value

        if not increments:
            return np.zeros(2)
        return -np.mean(increments, axis=0)

    def _check_fall(self, state: PlantState):
        limit = self.config.sim.fall_tilt
        if abs(state.roll) > limit or abs(state.pitch) > limit:
            raise FallDetectedError(
                state.tick, f"attitude out of range (roll={state.roll:.3f}, pitch={state.pitch:.3f})"
            )

        for a, b in DIAGONAL_PAIRS:
            if not (state.contacts[a] and state.contacts[b]):
                continue
            p, q = state.feet[a][:2], state.feet[b][:2]
            direction = q - p
            length = float(np.hypot(*direction))
            if length == 0.0:
                continue
            offset = state.position[:2] - p
            distance = abs(direction[0] * offset[1] - direction[1] * offset[0]) / length
            if distance > self.config.sim.fall_band:
                raise FallDetectedError(
                    state.tick, f"CoM {distance:.3f} m away from the {a}-{b} support diagonal"
                )

    def _record(self, state: PlantState, commanded_com: np.ndarray) -> List[float]:
        record = [
            state.time,
            state.position[0], state.position[1], state.position[2],
            state.yaw, state.roll, state.pitch,
            commanded_com[0], commanded_com[1], commanded_com[2],
            state.command.v, state.command.omega,
        ]
        for leg in LEG_NAMES:
            foot = state.feet[leg]
            record.extend([1.0 if state.contacts[leg] else 0.0, foot[0], foot[1], foot[2]])
        return record

    def step(self, state: PlantState) -> Tuple[PlantState, List[float]]:
        """
        1ティック進める（state はその場で更新して返す）

        Args:
            state: 現在のプラント状態

        Returns:
            (更新後の状態, ログ1行)

        Raises:
            FallDetectedError: 姿勢角または支持対角線からの逸脱が閾値超え
        """
        cfg = self.config
        dt = cfg.sim.dt

        previous_step = state.gait.step_index
        state.gait = advance_phase(state.gait, dt)
        state.tick += 1
        state.time = state.tick * dt
        if state.gait.step_index != previous_step:
            self._on_touchdown(state)

        reference = state.com_reference
        if state.com_sample < reference.sample_count:
            commanded_com = reference.positions[state.com_sample]
            com_velocity = reference.velocities[state.com_sample]
        else:
            commanded_com = reference.target
            com_velocity = np.zeros(3)
        state.com_sample += 1

        command = self._command(state)
        state.command = command

        c, s = math.cos(state.yaw), math.sin(state.yaw)
        displacement = np.array([
            (com_velocity[0] + command.v * c) * dt,
            (com_velocity[1] + command.v * s) * dt,
        ])
        yaw_change = command.omega * dt

        state.position[:2] += displacement
        state.yaw += yaw_change
        state.believed += np.array([displacement[0], displacement[1], yaw_change])
        posture_plane = self._posture_plane(state.plane, state.position[0], state.position[1])
        state.pitch, state.roll = posture_target(posture_plane, state.yaw)

        error = self._rolling_error(state)
        state.position[:2] += error
        state.injected_error += error
        state.position[2] = cfg.psp.standing_height + state.plane.height(state.position[0], state.position[1])

        for leg in state.gait.swing_legs:
            state.feet[leg] = np.array(swing_position(
                tuple(state.swing_start[leg]),
                tuple(state.swing_target[leg]),
                state.gait.swing_progress(leg),
                cfg.gait.swing_height,
            ))

        self._check_fall(state)
        return state, self._record(state, commanded_com)

    def run(self) -> TrajectoryLog:
        """
        設定の実行時間だけシミュレーションを回す

        Returns:
            TrajectoryLog

        Raises:
            FallDetectedError: 転倒判定（ティック番号付き）
        """
        cfg = self.config
        ticks = int(round(cfg.run_duration / cfg.sim.dt))
        report_every = max(1, int(round(5.0 / cfg.sim.dt)))

        log = TrajectoryLog()
        state = self.initial_state()
        for _ in range(ticks):
            state, record = self.step(state)
            log.append(record)
            if state.tick % report_every == 0:
                _notify_progress(
                    self.progress_callback,
                    f"t = {state.time:.1f} s / {cfg.run_duration:.1f} s",
                )
        return log


def run(config: SimConfig, progress_callback: Optional[Callable] = None) -> TrajectoryLog:
    """設定からシミュレーションを実行してログを返す"""
    return SpinSimulator(config, progress_callback).run()
