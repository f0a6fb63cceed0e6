"""
図の出力モジュール
重心軌跡・姿勢・加速度位相図・スイープ比較を plotly の図にして JSON で書き出す
（対話表示は行わない）
"""

from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import plotly.graph_objects as go

from spin_metrics import SpinMetrics
from trajectory_log import TrajectoryLog

ABLATION_COLORS = {
    "baseline": "rgb(255, 0, 0)",
    "fkm": "rgb(255, 200, 0)",
    "asc": "rgb(100, 100, 255)",
}


def trajectory_figure(log: TrajectoryLog, metrics: Optional[SpinMetrics] = None) -> go.Figure:
    """
    重心の xy 軌跡（mm、スピン中心基準）と当てはめ円

    Args:
        log: 軌跡ログ
        metrics: 解析結果（あれば当てはめ円を重ねる）

    Returns:
        plotly Figure
    """
    cols = log.columns("t", "com_x", "com_y")
    cx, cy = (metrics.spin_center if metrics else (cols["com_x"][0], cols["com_y"][0]))
    x_mm = (cols["com_x"] - cx) * 1000
    y_mm = (cols["com_y"] - cy) * 1000

    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=x_mm,
        y=y_mm,
        mode="lines",
        name="CoM",
        line=dict(color="rgb(100, 100, 255)", width=1),
        customdata=cols["t"],
        hovertemplate="t=%{customdata:.3f} s<br>x=%{x:.3f} mm<br>y=%{y:.3f} mm<extra></extra>",
    ))

    if metrics and metrics.fit_radius > 0:
        theta = np.linspace(0.0, 2.0 * np.pi, 361)
        fx, fy = metrics.fit_center
        fig.add_trace(go.Scatter(
            x=(fx - cx + metrics.fit_radius * np.cos(theta)) * 1000,
            y=(fy - cy + metrics.fit_radius * np.sin(theta)) * 1000,
            mode="lines",
            name=f"fit r={metrics.fit_radius * 1000:.2f} mm",
            line=dict(color="rgb(255, 0, 0)", dash="dash"),
        ))

    fig.add_trace(go.Scatter(x=[0.0], y=[0.0], mode="markers", name="spin center",
                             marker=dict(symbol="x", size=10, color="black")))
    fig.update_layout(
        title="CoM trajectory",
        xaxis_title="x [mm]",
        yaxis_title="y [mm]",
        yaxis=dict(scaleanchor="x", scaleratio=1),
        hovermode="closest",
    )
    return fig


def attitude_figure(log: TrajectoryLog) -> go.Figure:
    """roll / pitch の時系列 [deg]"""
    cols = log.columns("t", "roll", "pitch")
    fig = go.Figure()
    for name in ("roll", "pitch"):
        fig.add_trace(go.Scatter(x=cols["t"], y=np.degrees(cols[name]), mode="lines", name=name))
    fig.update_layout(title="Body attitude", xaxis_title="t [s]", yaxis_title="angle [deg]")
    return fig


def acceleration_figure(log: TrajectoryLog) -> go.Figure:
    """線加速度と角加速度の位相図（2階中心差分）"""
    cols = log.columns("t", "com_x", "com_y", "yaw")
    t = cols["t"]
    if len(t) < 3:
        return go.Figure()
    dt = float(np.median(np.diff(t)))

    def second_difference(values):
        return (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (dt * dt)

    acc = np.hypot(second_difference(cols["com_x"]), second_difference(cols["com_y"]))
    yaw_acc = second_difference(np.unwrap(cols["yaw"]))

    fig = go.Figure(go.Scatter(x=acc, y=yaw_acc, mode="markers", marker=dict(size=2)))
    fig.update_layout(
        title="Acceleration phase portrait",
        xaxis_title="linear acceleration [m/s²]",
        yaxis_title="angular acceleration [rad/s²]",
    )
    return fig


def sweep_figure(report: Dict, metric: str = "spin_radius") -> go.Figure:
    """
    スイープ結果の比較（平均 ± 標準偏差、mm 表示）

    Args:
        report: sweep_runner のレポート
        metric: 比較する指標
    """
    fig = go.Figure()
    for ablation in report.get("ablations", []):
        labels: List[str] = []
        means: List[float] = []
        sds: List[float] = []
        for entry in report.get("summary", []):
            if entry["ablation"] != ablation or metric not in entry["metrics"]:
                continue
            labels.append(f"{entry['terrain']} ω={entry['omega']:g}")
            means.append(entry["metrics"][metric]["mean"] * 1000)
            sds.append(entry["metrics"][metric]["sd"] * 1000)
        fig.add_trace(go.Bar(
            x=labels,
            y=means,
            name=ablation,
            error_y=dict(type="data", array=sds),
            marker_color=ABLATION_COLORS.get(ablation),
        ))
    fig.update_layout(barmode="group", title=f"{metric} by ablation", yaxis_title=f"{metric} [mm]")
    return fig


def write_figure(fig: go.Figure, path: str):
    """図を plotly JSON として保存"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.write_json(path)


def write_run_figures(log: TrajectoryLog, metrics: Optional[SpinMetrics], out_dir: str) -> List[str]:
    """
    1回の走行の図をまとめて保存

    Returns:
        保存したファイルパスのリスト
    """
    figures = {
        "trajectory.json": trajectory_figure(log, metrics),
        "attitude.json": attitude_figure(log),
        "acceleration.json": acceleration_figure(log),
    }
    paths = []
    for filename, fig in figures.items():
        path = str(Path(out_dir) / filename)
        write_figure(fig, path)
        paths.append(path)
    return paths
