"""
ドリフト解析モジュール
軌跡ログから円フィッティング、分散、加速度分散、ドリフト傾向を計算する
"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from sklearn.linear_model import LinearRegression

from errors import DegenerateFitError, InsufficientDataError
from trajectory_log import TrajectoryLog

# 傾き推定に使う点の最大数
TREND_MAX_POINTS = 500


@dataclass(frozen=True)
class CircleFit:
    center: Tuple[float, float]
    radius: float
    radial_variance: float


@dataclass(frozen=True)
class TrendResult:
    """距離の時間傾きとその95%信頼区間"""

    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    effective_samples: float

    @property
    def contains_zero(self) -> bool:
        return self.ci_low <= 0.0 <= self.ci_high


@dataclass(frozen=True)
class SpinMetrics:
    """
    1回の走行のドリフト指標（SI単位: m, m², rad, rad²）
    """

    spin_center: Tuple[float, float]
    fit_center: Tuple[float, float]
    fit_radius: float
    radial_variance: float
    spin_radius: float
    mean_error: float
    max_error: float
    drift_x: float
    drift_y: float
    roll_mean: float
    roll_variance: float
    pitch_mean: float
    pitch_variance: float
    linear_acc_variance: Tuple[float, float]
    angular_acc_variance: float
    trend_slope: float
    trend_ci: Tuple[float, float]
    duration: float
    samples: int

    def to_dict(self) -> Dict:
        data = asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in data.items()}


def fit_circle(points: Sequence[Sequence[float]]) -> CircleFit:
    """
    代数的（Kåsa）最小二乗円フィッティング

    ‖p‖² = 2c·p + (ρ² − ‖c‖²) を線形回帰で解く。重心を引いてスケールを揃えてから解く。

    Args:
        points: (n, 2) の点列

    Returns:
        CircleFit

    Raises:
        DegenerateFitError: 3点未満、または共線
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateFitError("Circle fit needs at least 3 points")

    mean = pts.mean(axis=0)
    centered = pts - mean
    scale = float(np.max(np.abs(centered)))
    if scale == 0.0:
        raise DegenerateFitError("All points coincide")

    normalized = centered / scale
    singular_values = np.linalg.svd(normalized, compute_uv=False)
    if singular_values[-1] <= 1e-9 * singular_values[0]:
        raise DegenerateFitError("Points are collinear")

    model = LinearRegression().fit(normalized, np.sum(normalized ** 2, axis=1))
    center_n = model.coef_ / 2.0
    radius_n = math.sqrt(max(model.intercept_ + float(center_n @ center_n), 0.0))

    center = mean + center_n * scale
    distances = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    return CircleFit(
        center=(float(center[0]), float(center[1])),
        radius=radius_n * scale,
        radial_variance=float(np.var(distances, ddof=1)),
    )


def drift_trend(times: np.ndarray, distances: np.ndarray) -> TrendResult:
    """
    中心からの距離の線形傾向

    残差の1次自己相関で有効サンプル数を補正した95%信頼区間を返す。

    Args:
        times: 時刻 [s]
        distances: 中心からの距離 [m]

    Returns:
        TrendResult
    """
    times = np.asarray(times, dtype=float)
    distances = np.asarray(distances, dtype=float)
    n = len(times)
    if n < 3:
        raise InsufficientDataError("Trend needs at least 3 samples")

    stride = max(1, n // TREND_MAX_POINTS)
    t = times[::stride]
    d = distances[::stride]
    n = len(t)

    if np.ptp(d) == 0.0:
        return TrendResult(0.0, float(d[0]), 0.0, 0.0, float(n))

    fit = stats.linregress(t, d)
    residuals = d - (fit.intercept + fit.slope * t)
    rho = 0.0
    if np.std(residuals) > 0:
        rho = float(np.corrcoef(residuals[:-1], residuals[1:])[0, 1])
        rho = min(max(rho, 0.0), 0.99)
    effective = max(3.0, n * (1.0 - rho) / (1.0 + rho))

    stderr = fit.stderr * math.sqrt((n - 2) / max(effective - 2, 1.0))
    half_width = stats.t.ppf(0.975, max(effective - 2, 1.0)) * stderr
    return TrendResult(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        ci_low=float(fit.slope - half_width),
        ci_high=float(fit.slope + half_width),
        effective_samples=float(effective),
    )


def _acceleration_variance(values: np.ndarray, dt: float) -> float:
    if len(values) < 3:
        return 0.0
    acc = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (dt * dt)
    return float(np.var(acc, ddof=1)) if len(acc) > 1 else 0.0


def _sample_variance(values: np.ndarray) -> float:
    return float(np.var(values, ddof=1))


def analyze(
    log: TrajectoryLog,
    trim_seconds: float = 5.0,
    center: Optional[Tuple[float, float]] = None,
    min_duration: float = 0.0
) -> SpinMetrics:
    """
    軌跡ログからドリフト指標を計算

    Args:
        log: 軌跡ログ
        trim_seconds: 先頭から除外する時間 [s]
        center: スピン中心（省略時はログ先頭の重心位置）
        min_duration: 除外後に必要な最小時間 [s]

    Returns:
        SpinMetrics

    Raises:
        InsufficientDataError: 除外後のデータが不足
    """
    data = log.to_array()
    if len(data) == 0:
        raise InsufficientDataError("Trajectory log is empty")

    cols = log.columns("t", "com_x", "com_y", "yaw", "roll", "pitch")
    t = cols["t"]
    if center is None:
        center = (float(cols["com_x"][0]), float(cols["com_y"][0]))

    mask = t >= t[0] + trim_seconds
    if mask.sum() < 3:
        raise InsufficientDataError(
            f"Only {int(mask.sum())} records remain after trimming {trim_seconds} s"
        )
    t = t[mask]
    duration = float(t[-1] - t[0])
    if duration < min_duration:
        raise InsufficientDataError(f"Trimmed log spans {duration:.3f} s < {min_duration} s")

    x = cols["com_x"][mask]
    y = cols["com_y"][mask]
    dx = x - center[0]
    dy = y - center[1]
    distances = np.hypot(dx, dy)

    try:
        fit = fit_circle(np.column_stack([x, y]))
    except DegenerateFitError:
        fit = CircleFit(center=(float(np.mean(x)), float(np.mean(y))), radius=0.0, radial_variance=0.0)

    dt = float(np.median(np.diff(t)))
    yaw = np.unwrap(cols["yaw"][mask])
    trend = drift_trend(t, distances)

    return SpinMetrics(
        spin_center=(float(center[0]), float(center[1])),
        fit_center=fit.center,
        fit_radius=fit.radius,
        radial_variance=fit.radial_variance,
        spin_radius=float(np.sqrt(np.mean(distances ** 2))),
        mean_error=float(np.mean(distances)),
        max_error=float(np.max(distances)),
        drift_x=float(np.max(np.abs(dx))),
        drift_y=float(np.max(np.abs(dy))),
        roll_mean=float(np.mean(cols["roll"][mask])),
        roll_variance=_sample_variance(cols["roll"][mask]),
        pitch_mean=float(np.mean(cols["pitch"][mask])),
        pitch_variance=_sample_variance(cols["pitch"][mask]),
        linear_acc_variance=(_acceleration_variance(x, dt), _acceleration_variance(y, dt)),
        angular_acc_variance=_acceleration_variance(yaw, dt),
        trend_slope=trend.slope,
        trend_ci=(trend.ci_low, trend.ci_high),
        duration=duration,
        samples=int(len(t)),
    )
