"""
実行結果管理モジュール
シミュレーション結果を runs/<名前>/ に保存し、設定・指標・軌跡ログを管理する
"""

import json
import os
import shutil
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv

from run_config import SimConfig, config_from_dict, config_to_dict
from spin_metrics import SpinMetrics
from trajectory_log import TrajectoryLog

load_dotenv()


def default_runs_dir() -> str:
    """環境変数 SPIN_RUNS_DIR があればそれを使う"""
    return os.getenv("SPIN_RUNS_DIR", "runs")


class RunManager:
    """実行結果の保存先を管理するクラス"""

    def __init__(self, runs_dir: Optional[str] = None):
        """
        Args:
            runs_dir: 実行結果を保存するディレクトリ
        """
        self.runs_dir = Path(runs_dir or default_runs_dir())
        self.runs_dir.mkdir(parents=True, exist_ok=True)

    def list_runs(self) -> List[Dict]:
        """
        実行結果の一覧を取得

        Returns:
            メタデータのリスト（更新日時の新しい順）
        """
        runs = []

        for run_path in self.runs_dir.iterdir():
            if not run_path.is_dir():
                continue

            metadata_path = run_path / "metadata.json"
            if not metadata_path.exists():
                continue

            try:
                with open(metadata_path, 'r', encoding='utf-8') as f:
                    runs.append(json.load(f))
            except Exception as e:
                print(f"[ERROR] Failed to load run metadata: {run_path.name} - {e}")

        runs.sort(key=lambda x: x.get("updated_at", ""), reverse=True)
        return runs

    def run_exists(self, name: str) -> bool:
        return (self.runs_dir / self._sanitize_run_name(name) / "metadata.json").exists()

    def create_run(
        self,
        name: str,
        config: SimConfig,
        ablation: str = "custom",
        overwrite: bool = False
    ) -> 'SimulationRun':
        """
        新規の実行結果を作成

        Args:
            name: 実行名
            config: 実行設定
            ablation: アブレーション名（baseline / fkm / asc / custom）
            overwrite: 既存の同名結果を上書きするか

        Returns:
            SimulationRunオブジェクト
        """
        safe_name = self._sanitize_run_name(name)
        run_path = self.runs_dir / safe_name

        if run_path.exists():
            if not overwrite:
                raise ValueError(f"Run '{name}' already exists")
            shutil.rmtree(run_path)

        run_path.mkdir(parents=True)

        now = datetime.now().isoformat()
        metadata = {
            "name": name,
            "safe_name": safe_name,
            "created_at": now,
            "updated_at": now,
            "status": "created",
            "ablation": ablation,
            "seed": config.sim.seed,
            "config": config_to_dict(config),
            "metrics": None,
            "error": None,
        }

        with open(run_path / "metadata.json", 'w', encoding='utf-8') as f:
            json.dump(metadata, f, ensure_ascii=False, indent=2)

        return SimulationRun(run_path)

    def load_run(self, name: str) -> 'SimulationRun':
        """
        既存の実行結果を読み込み

        Args:
            name: 実行名（safe_nameまたは元の名前）

        Returns:
            SimulationRunオブジェクト
        """
        run_path = self.runs_dir / name

        if not run_path.exists():
            run_path = self.runs_dir / self._sanitize_run_name(name)

        if not run_path.exists():
            raise ValueError(f"Run '{name}' not found")

        return SimulationRun(run_path)

    def delete_run(self, name: str):
        """
        実行結果を削除

        Args:
            name: 実行名
        """
        run = self.load_run(name)
        shutil.rmtree(run.run_path)

    def _sanitize_run_name(self, name: str) -> str:
        """
        実行名をファイルシステムに安全な名前に変換

        Args:
            name: 実行名

        Returns:
            安全な名前
        """
        safe_name = name
        for ch in '/\\:*?"<>|':
            safe_name = safe_name.replace(ch, '_')
        safe_name = safe_name.replace(' ', '_')

        if len(safe_name) > 100:
            safe_name = safe_name[:100]

        return safe_name


class SimulationRun:
    """1回分の実行結果"""

    def __init__(self, run_path: Path):
        """
        Args:
            run_path: 実行結果ディレクトリのパス
        """
        self.run_path = Path(run_path)
        self.metadata_path = self.run_path / "metadata.json"
        self.log_path = self.run_path / "trajectory.csv"
        self.figures_dir = self.run_path / "figures"

        with open(self.metadata_path, 'r', encoding='utf-8') as f:
            self.metadata = json.load(f)

    @property
    def name(self) -> str:
        return self.metadata["name"]

    @property
    def config(self) -> SimConfig:
        return config_from_dict(self.metadata["config"])

    def save(self):
        """メタデータを保存"""
        self.metadata["updated_at"] = datetime.now().isoformat()
        with open(self.metadata_path, 'w', encoding='utf-8') as f:
            json.dump(self.metadata, f, ensure_ascii=False, indent=2)

    def save_log(self, log: TrajectoryLog):
        """軌跡ログを保存して状態を completed にする"""
        log.write_csv(str(self.log_path))
        self.metadata["status"] = "completed"
        self.metadata["records"] = len(log)
        self.save()

    def has_log(self) -> bool:
        return self.log_path.exists()

    def load_log(self) -> TrajectoryLog:
        if not self.has_log():
            raise ValueError(f"Run '{self.name}' has no trajectory log")
        return TrajectoryLog.read_csv(str(self.log_path))

    def mark_failed(self, error: Exception):
        """失敗を記録"""
        self.metadata["status"] = "failed"
        self.metadata["error"] = {"type": type(error).__name__, "message": str(error)}
        self.save()

    def set_metrics(self, metrics: SpinMetrics, trim_seconds: float):
        """解析結果を記録"""
        self.metadata["metrics"] = metrics.to_dict()
        self.metadata["trim_seconds"] = trim_seconds
        self.metadata["analyzed_at"] = datetime.now().isoformat()
        self.save()

    def has_metrics(self) -> bool:
        return bool(self.metadata.get("metrics"))

    def get_statistics(self) -> Dict:
        """
        主要な統計値を取得

        Returns:
            統計情報（未解析なら空）
        """
        metrics = self.metadata.get("metrics") or {}
        keys = ("spin_radius", "fit_radius", "radial_variance", "mean_error", "max_error")
        return {key: metrics[key] for key in keys if key in metrics}

    def export_to_json(self, output_path: str):
        """
        実行結果をJSONファイルにエクスポート

        Args:
            output_path: 出力ファイルパス
        """
        export_data = {
            "metadata": self.metadata,
            "statistics": self.get_statistics(),
            "trajectory_file": str(self.log_path) if self.has_log() else None,
        }

        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(export_data, f, ensure_ascii=False, indent=2)
