"""
投影支持多角形（PSP）による重心計画モジュール

遊脚の足位置も位相に応じた重みで仮想頂点として扱い、
重み付き頂点の平均から目標重心を求める
"""

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import stats

from errors import DegenerateSupportError
from gait_planner import GaitState
from leg_kinematics import DIAGONAL_PAIRS, LEG_NAMES
from terrain_estimator import TerrainPlane

DISTRIBUTIONS = ("gaussian", "poisson", "geometric")


@dataclass(frozen=True)
class DistributionParams:
    """
    立脚重みの分布パラメータ

    Args:
        kind: gaussian / poisson / geometric
        sigma: 広がり（立脚期間に対する比）
    """

    kind: str = "gaussian"
    sigma: float = 0.16

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise ValueError(f"Unknown distribution: {self.kind}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class SupportVertexSet:
    """支持多角形の頂点集合（LEG_NAMES の順）"""

    origin: np.ndarray
    vectors: np.ndarray
    projected_vectors: np.ndarray
    weights: np.ndarray
    weighted_vertices: np.ndarray
    projected_vertices: np.ndarray


@dataclass(frozen=True)
class ComReference:
    """重心の参照軌道"""

    target: np.ndarray
    velocity: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def sample_count(self) -> int:
        return len(self.positions)


def stance_weight(
    phase: float,
    stance: bool,
    dist: DistributionParams = DistributionParams(),
    duty_factor: float = 0.5
) -> float:
    """
    位相に応じた脚の重み

    遊脚は0、立脚は立脚進捗 0.5 で最大値1をとる単峰分布。

    Args:
        phase: 脚の歩容位相 [0, 1)
        stance: 立脚かどうか
        dist: 分布パラメータ
        duty_factor: デューティ比

    Returns:
        重み [0, 1]
    """
    if not stance:
        return 0.0

    progress = min(max(phase / duty_factor, 0.0), 1.0)
    offset = progress - 0.5

    if dist.kind == "gaussian":
        return math.exp(-0.5 * (offset / dist.sigma) ** 2)

    if dist.kind == "poisson":
        # 立脚期間を離散区間に分けた対称化ポアソン
        bins = max(2, int(round(1.0 / dist.sigma)))
        mode = bins // 2
        k = mode + int(round(abs(offset) * bins))
        return float(stats.poisson.pmf(k, mode) / stats.poisson.pmf(mode, mode))

    k = int(math.floor(abs(offset) / dist.sigma))
    return float(stats.geom.pmf(k + 1, 0.5) / stats.geom.pmf(1, 0.5))


def _support_origin(feet: np.ndarray, gait: GaitState) -> np.ndarray:
    stance_pairs = [
        pair for pair in DIAGONAL_PAIRS if gait.is_stance(pair[0]) and gait.is_stance(pair[1])
    ]
    if not stance_pairs:
        # 対角でない2脚（デューティ比 > 0.5 の過渡など）
        idx = [LEG_NAMES.index(leg) for leg in gait.stance_legs]
        return feet[idx].mean(axis=0)

    # 両ペアが立脚中なら、立脚進捗が中央に近いペアを使う
    def centrality(pair):
        return -sum(abs(gait.stance_progress(leg) - 0.5) for leg in pair)

    a, b = max(stance_pairs, key=centrality)
    return 0.5 * (feet[LEG_NAMES.index(a)] + feet[LEG_NAMES.index(b)])


def support_vertices(
    feet: Dict[str, Tuple[float, float, float]],
    gait: GaitState,
    dist: DistributionParams = DistributionParams()
) -> SupportVertexSet:
    """
    位相重み付きの投影支持頂点を構成

    Args:
        feet: 脚ごとの足位置（ワールド座標）
        gait: 歩容状態
        dist: 分布パラメータ

    Returns:
        SupportVertexSet

    Raises:
        DegenerateSupportError: 立脚が2本未満
    """
    if len(gait.stance_legs) < 2:
        raise DegenerateSupportError(
            f"Support needs at least 2 stance legs, got {len(gait.stance_legs)}"
        )

    positions = np.array([feet[leg] for leg in LEG_NAMES], dtype=float)
    origin = _support_origin(positions, gait)
    vectors = positions - origin
    projected = vectors.copy()
    projected[:, 2] = 0.0

    weights = np.array([
        stance_weight(gait.phase_of(leg), gait.is_stance(leg), dist, gait.duty_factor)
        for leg in LEG_NAMES
    ])
    weighted = weights[:, None] * projected
    return SupportVertexSet(
        origin=origin,
        vectors=vectors,
        projected_vectors=projected,
        weights=weights,
        weighted_vertices=weighted,
        projected_vertices=origin + weighted,
    )


def desired_com(
    feet: Dict[str, Tuple[float, float, float]],
    gait: GaitState,
    dist: DistributionParams = DistributionParams(),
    standing_height: float = 0.29,
    plane: TerrainPlane = TerrainPlane()
) -> np.ndarray:
    """
    目標重心位置 = 投影頂点4点の平均

    z は推定平面上の立ち高さ。

    Returns:
        目標重心 (x, y, z) [m]
    """
    support = support_vertices(feet, gait, dist)
    xy = support.projected_vertices[:, :2].mean(axis=0)
    return np.array([xy[0], xy[1], plane.height(xy[0], xy[1]) + standing_height])


def interpolate_com(
    current: np.ndarray,
    target: np.ndarray,
    cycle_period: float,
    dt: float
) -> ComReference:
    """
    現在位置から目標まで等速で重心軌道を補間

    速度 v = (target − current)/T、f = floor(T/dt) 点。

    Args:
        current: 現在の重心位置
        target: 目標重心位置
        cycle_period: 歩容周期 T [s]
        dt: 補間間隔 [s]

    Returns:
        ComReference
    """
    if cycle_period <= 0 or dt <= 0 or dt > cycle_period:
        raise ValueError("interpolate_com requires 0 < dt <= T")

    current = np.asarray(current, dtype=float)
    target = np.asarray(target, dtype=float)
    velocity = (target - current) / cycle_period
    count = int(math.floor(cycle_period / dt + 1e-9))

    steps = np.arange(1, count + 1, dtype=float)[:, None] * dt
    positions = current + steps * velocity
    if abs(count * dt - cycle_period) <= 1e-9 * cycle_period:
        positions[-1] = target
    velocities = np.tile(velocity, (count, 1))
    return ComReference(target=target, velocity=velocity, positions=positions, velocities=velocities)
