"""
保存済みの実行結果を再解析して指標を付け直すスクリプト

Usage:
    python reanalyze_runs.py [--runs-dir DIR] [--trim-seconds S] [--force]
    例: python reanalyze_runs.py --trim-seconds 5 --force
"""

import argparse
from typing import Callable, Dict, Optional

from errors import SpinControlError
from run_manager import RunManager
from spin_metrics import analyze


def reanalyze_runs(
    manager: RunManager,
    trim_seconds: Optional[float] = None,
    force: bool = False,
    progress_callback: Optional[Callable] = None
) -> Dict[str, int]:
    """
    指標がない（または force 指定の）実行結果を再解析

    Args:
        manager: RunManager
        trim_seconds: 先頭除外時間（省略時は各実行の設定値）
        force: 既存の指標も計算し直す
        progress_callback: 進捗通知用コールバック関数

    Returns:
        件数の集計 {"total", "updated", "skipped", "failed"}
    """
    notify = progress_callback or print
    runs = manager.list_runs()
    counts = {"total": len(runs), "updated": 0, "skipped": 0, "failed": 0}

    for i, metadata in enumerate(runs, 1):
        name = metadata.get("safe_name") or metadata.get("name")
        run = manager.load_run(name)

        if run.has_metrics() and not force:
            notify(f"[{i}/{counts['total']}] スキップ（既存）: {run.name}")
            counts["skipped"] += 1
            continue

        if not run.has_log():
            notify(f"[{i}/{counts['total']}] ❌ ログがありません: {run.name}")
            counts["failed"] += 1
            continue

        trim = trim_seconds if trim_seconds is not None else run.config.analysis.trim_seconds
        try:
            metrics = analyze(run.load_log(), trim_seconds=trim)
        except (SpinControlError, ValueError) as e:
            notify(f"[{i}/{counts['total']}] ❌ 解析失敗: {run.name} - {e}")
            counts["failed"] += 1
            continue

        run.set_metrics(metrics, trim)
        notify(
            f"[{i}/{counts['total']}] ✅ {run.name}: "
            f"spin radius {metrics.spin_radius * 1000:.3f} mm"
        )
        counts["updated"] += 1

    return counts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="保存済みの実行結果を再解析")
    parser.add_argument("--runs-dir", default=None, help="実行結果ディレクトリ（既定: SPIN_RUNS_DIR または runs）")
    parser.add_argument("--trim-seconds", type=float, default=None, help="先頭から除外する時間 [s]")
    parser.add_argument("--force", action="store_true", help="既存の指標も再計算する")
    args = parser.parse_args(argv)

    manager = RunManager(args.runs_dir)
    print(f"\n{'='*60}")
    print(f"'{manager.runs_dir}' の実行結果を再解析します")
    print(f"{'='*60}\n")

    counts = reanalyze_runs(manager, args.trim_seconds, args.force)

    print(f"\n{'='*60}")
    print("完了")
    print(f"{'='*60}")
    print(f"総数:              {counts['total']}件")
    print(f"更新:              {counts['updated']}件")
    print(f"スキップ（既存）:  {counts['skipped']}件")
    print(f"失敗:              {counts['failed']}件")
    print(f"{'='*60}\n")
    return 0 if counts["failed"] == 0 else 4


if __name__ == "__main__":
    raise SystemExit(main())
