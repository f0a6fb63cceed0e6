"""
アブレーション・スイープ実行モジュール
(地形 × 角速度 × アブレーション × シード) の各セルを実行し、
指標を集計して順序判定と角速度傾向を含むレポートを作成する
"""

import json
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from errors import ConfigError, SpinControlError
from run_config import SimConfig, config_from_dict, config_to_dict, with_section
from spin_metrics import analyze
from spin_simulator import SpinSimulator

# アブレーション名 → (fkm.enabled, lqr.enabled)
ABLATIONS: Dict[str, tuple] = {
    "baseline": (False, False),
    "fkm": (True, False),
    "asc": (True, True),
}

# 順序判定に必要な相対マージン
ORDERING_MARGIN = 0.10

SUMMARY_KEYS = (
    "spin_radius",
    "fit_radius",
    "radial_variance",
    "mean_error",
    "max_error",
    "roll_variance",
    "pitch_variance",
)

REPORT_UNITS = {
    "spin_radius": "m",
    "fit_radius": "m",
    "radial_variance": "m^2",
    "mean_error": "m",
    "max_error": "m",
    "roll_variance": "rad^2",
    "pitch_variance": "rad^2",
    "omega": "rad/s",
}


@dataclass(frozen=True)
class SweepCell:
    terrain: str
    omega: float
    ablation: str
    seed: int

    @property
    def label(self) -> str:
        return f"{self.terrain}_w{self.omega:g}_{self.ablation}_s{self.seed}"


def apply_ablation(config: SimConfig, ablation: str) -> SimConfig:
    """
    アブレーション設定を適用

    Args:
        config: 元の設定
        ablation: baseline / fkm / asc

    Returns:
        新しい SimConfig
    """
    if ablation not in ABLATIONS:
        raise ConfigError(f"Unknown ablation '{ablation}' (expected one of {sorted(ABLATIONS)})")
    fkm_enabled, lqr_enabled = ABLATIONS[ablation]
    config = with_section(config, "fkm", enabled=fkm_enabled)
    return with_section(config, "lqr", enabled=lqr_enabled)


def cell_config(base: SimConfig, cell: SweepCell) -> SimConfig:
    config = apply_ablation(base, cell.ablation)
    config = with_section(config, "terrain", kind=cell.terrain)
    config = with_section(config, "turn", omega=float(cell.omega))
    return with_section(config, "sim", seed=int(cell.seed))


def _ignore_progress(message: str):
    """セル内のシミュレーション進捗は出さない（セル単位で通知する）"""


def run_cell(config_data: Dict, cell: SweepCell, log_dir: Optional[str] = None) -> Dict:
    """
    1セルを実行（プロセスプールから呼ばれる）

    失敗してもスイープは止めず、失敗内容を結果に記録する。

    Returns:
        セルの結果辞書
    """
    result = {
        "terrain": cell.terrain,
        "omega": cell.omega,
        "ablation": cell.ablation,
        "seed": cell.seed,
    }
    try:
        config = cell_config(config_from_dict(config_data), cell)
        log = SpinSimulator(config, progress_callback=_ignore_progress).run()
        if log_dir:
            path = Path(log_dir) / f"{cell.label}.csv"
            log.write_csv(str(path))
            result["log_path"] = str(path)
        metrics = analyze(log, trim_seconds=config.analysis.trim_seconds)
        result["status"] = "ok"
        result["metrics"] = metrics.to_dict()
    except SpinControlError as e:
        result["status"] = "failed"
        result["error_type"] = type(e).__name__
        result["message"] = str(e)
    return result


def _summarize(cells: List[Dict]) -> Dict:
    ok = [c for c in cells if c["status"] == "ok"]
    summary = {"n_ok": len(ok), "n_failed": len(cells) - len(ok), "metrics": {}}
    for key in SUMMARY_KEYS:
        values = np.array([c["metrics"][key] for c in ok], dtype=float)
        if len(values) == 0:
            continue
        summary["metrics"][key] = {
            "mean": float(values.mean()),
            "sd": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
        }
    return summary


def ordering_verdict(means: Dict[str, float], margin: float = ORDERING_MARGIN) -> Dict:
    """
    spin radius の順序 baseline > fkm > asc を判定

    Args:
        means: アブレーション名 → 平均 spin radius
        margin: 必要な相対マージン

    Returns:
        {"holds", "baseline_over_fkm", "fkm_over_asc"}（比較できない場合 holds は None）
    """
    if not all(name in means for name in ("baseline", "fkm", "asc")):
        return {"holds": None, "baseline_over_fkm": None, "fkm_over_asc": None}

    def relative(a: float, b: float) -> float:
        return float("inf") if b == 0 else a / b - 1.0

    over_fkm = relative(means["baseline"], means["fkm"])
    over_asc = relative(means["fkm"], means["asc"])
    return {
        "holds": bool(over_fkm > margin and over_asc > margin),
        "baseline_over_fkm": over_fkm,
        "fkm_over_asc": over_asc,
    }


class SweepRunner:
    """
    スイープ実行クラス

    Args:
        base_config: 全セル共通の設定
        workers: 並列プロセス数（1なら逐次）
        log_dir: セルごとの軌跡ログ保存先（省略時は保存しない）
    """

    def __init__(self, base_config: SimConfig, workers: int = 1, log_dir: Optional[str] = None):
        self.base_config = base_config
        self.workers = max(1, int(workers))
        self.log_dir = log_dir
        if log_dir:
            Path(log_dir).mkdir(parents=True, exist_ok=True)

    def run(
        self,
        ablations: Sequence[str],
        seeds: Sequence[int],
        omegas: Optional[Sequence[float]] = None,
        terrains: Optional[Sequence[str]] = None,
        progress_callback: Optional[Callable] = None,
        should_stop_callback: Optional[Callable] = None
    ) -> Dict:
        """
        スイープを実行してレポートを作成

        Args:
            ablations: アブレーション名のリスト
            seeds: シードのリスト
            omegas: 角速度のリスト（省略時は設定値）
            terrains: 地形のリスト（省略時は設定値）
            progress_callback: 進捗通知用コールバック関数
            should_stop_callback: 停止チェック用コールバック関数（Trueを返すと未実行セルを中止）

        Returns:
            レポート辞書
        """
        for ablation in ablations:
            if ablation not in ABLATIONS:
                raise ConfigError(f"Unknown ablation '{ablation}'")

        omegas = list(omegas) if omegas else [self.base_config.turn.omega]
        terrains = list(terrains) if terrains else [self.base_config.terrain.kind]
        cells = [
            SweepCell(terrain, float(omega), ablation, int(seed))
            for terrain in terrains
            for omega in omegas
            for ablation in ablations
            for seed in seeds
        ]

        results = self._execute(cells, progress_callback, should_stop_callback)
        return self._build_report(list(ablations), list(seeds), omegas, terrains, results)

    def _execute(
        self,
        cells: List[SweepCell],
        progress_callback: Optional[Callable],
        should_stop_callback: Optional[Callable]
    ) -> List[Dict]:
        config_data = config_to_dict(self.base_config)
        results: Dict[int, Dict] = {}
        total = len(cells)

        if self.workers == 1:
            for index, cell in enumerate(cells):
                if should_stop_callback and should_stop_callback():
                    self._notify_progress(progress_callback, "停止リクエストを受け付けました")
                    break
                results[index] = run_cell(config_data, cell, self.log_dir)
                self._report_cell(progress_callback, len(results), total, results[index])
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                futures = {
                    pool.submit(run_cell, config_data, cell, self.log_dir): index
                    for index, cell in enumerate(cells)
                }
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    self._report_cell(progress_callback, len(results), total, results[futures[future]])
                    if should_stop_callback and should_stop_callback():
                        self._notify_progress(progress_callback, "停止リクエストを受け付けました")
                        for pending in futures:
                            pending.cancel()
                        break

        return [results[i] for i in sorted(results)]

    def _report_cell(self, callback: Optional[Callable], done: int, total: int, result: Dict):
        label = f"{result['terrain']} ω={result['omega']:g} {result['ablation']} seed={result['seed']}"
        if result["status"] == "ok":
            radius = result["metrics"]["spin_radius"] * 1000
            self._notify_progress(callback, f"[{done}/{total}] ✅ {label}: spin radius {radius:.3f} mm")
        else:
            self._notify_progress(callback, f"[{done}/{total}] ❌ {label}: {result['error_type']} - {result['message']}")

    def _build_report(
        self,
        ablations: List[str],
        seeds: List[int],
        omegas: List[float],
        terrains: List[str],
        results: List[Dict]
    ) -> Dict:
        summary = []
        ordering = []
        trend = []

        for terrain in terrains:
            for omega in omegas:
                means = {}
                for ablation in ablations:
                    group = [
                        r for r in results
                        if r["terrain"] == terrain and r["omega"] == float(omega) and r["ablation"] == ablation
                    ]
                    if not group:
                        continue
                    entry = {"terrain": terrain, "omega": float(omega), "ablation": ablation, **_summarize(group)}
                    summary.append(entry)
                    if "spin_radius" in entry["metrics"]:
                        means[ablation] = entry["metrics"]["spin_radius"]["mean"]
                if means:
                    ordering.append({"terrain": terrain, "omega": float(omega), **ordering_verdict(means)})

            if len(omegas) > 1:
                for ablation in ablations:
                    series = []
                    for omega in sorted(float(w) for w in omegas):
                        entry = next(
                            (s for s in summary
                             if s["terrain"] == terrain and s["omega"] == omega and s["ablation"] == ablation),
                            None,
                        )
                        if entry and "mean_error" in entry["metrics"]:
                            series.append((omega, entry["metrics"]["mean_error"]["mean"]))
                    if len(series) < 2:
                        continue
                    errors = [value for _, value in series]
                    trend.append({
                        "terrain": terrain,
                        "ablation": ablation,
                        "omegas": [omega for omega, _ in series],
                        "mean_error": errors,
                        "nondecreasing": bool(all(b >= a for a, b in zip(errors, errors[1:]))),
                    })

        return {
            "units": REPORT_UNITS,
            "ablations": ablations,
            "seeds": seeds,
            "omegas": [float(w) for w in omegas],
            "terrains": terrains,
            "cells": results,
            "summary": summary,
            "ordering": ordering,
            "omega_trend": trend,
        }

    def _notify_progress(self, callback: Optional[Callable], message: str):
        """進捗を通知"""
        if callback:
            callback(message)
        else:
            print(message)


def sweep(
    base_config: SimConfig,
    ablations: Sequence[str],
    seeds: Sequence[int],
    omegas: Optional[Sequence[float]] = None,
    terrains: Optional[Sequence[str]] = None,
    workers: int = 1,
    log_dir: Optional[str] = None,
    progress_callback: Optional[Callable] = None
) -> Dict:
    """SweepRunner の簡易呼び出し"""
    runner = SweepRunner(base_config, workers=workers, log_dir=log_dir)
    return runner.run(ablations, seeds, omegas, terrains, progress_callback=progress_callback)


def write_report(report: Dict, path: str):
    """レポートをJSONで保存"""
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report, f, ensure_ascii=False, indent=2)
