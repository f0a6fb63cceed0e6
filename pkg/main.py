"""
スピン制御ツールキットのコマンドラインインターフェース

Usage:
    python main.py simulate --config example_config.json --seed 1 --out run.csv
    python main.py analyze --log run.csv --trim-seconds 5 --out metrics.json
    python main.py sweep --config example_config.json --ablations baseline,fkm,asc --seeds 1..5
    python main.py lqr-gain --config example_config.json
    python main.py kin --fk 0.2,0.3,-0.6
    python main.py schema

終了コード: 0 成功, 2 設定エラー, 3 実行失敗, 4 データ不足
"""

import argparse
import json
import sys
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv

from errors import ConfigError, InsufficientDataError, KinematicsError, RunFailure
from figures import sweep_figure, write_figure, write_run_figures
from foot_rolling import contact_pair, solve_corrected_ik
from leg_kinematics import KNEE_BACKWARD, KNEE_FORWARD, HipFramePoint, JointAngles, forward_kinematics, inverse_kinematics
from lqr_tracker import LqrTracker
from run_config import SimConfig, load_config, schema_table, with_section
from run_manager import RunManager
from spin_metrics import analyze
from spin_simulator import SpinSimulator
from sweep_runner import ABLATIONS, SweepRunner, apply_ablation, write_report
from trajectory_log import TrajectoryLog

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN_FAILURE = 3
EXIT_INSUFFICIENT_DATA = 4


def parse_floats(text: str, count: Optional[int] = None) -> List[float]:
    """'a,b,c' を数値リストに変換"""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Expected comma-separated numbers, got '{text}'") from e
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"Numbers must be finite, got '{text}'")
    if count is not None and len(values) != count:
        raise ConfigError(f"Expected {count} numbers, got '{text}'")
    return values


def parse_seeds(text: str) -> List[int]:
    """'1..5' または '1,2,3' をシードのリストに変換"""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Invalid seed list '{text}'") from e


def parse_names(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _load(path: Optional[str]) -> SimConfig:
    return load_config(path) if path else SimConfig()


def _format_matrix(name: str, matrix: np.ndarray) -> str:
    rows = np.atleast_2d(matrix)
    lines = [f"{name} ="]
    for row in rows:
        lines.append("  [" + ", ".join(f"{v: .6e}" for v in row) + "]")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    config = _load(args.config)
    if args.seed is not None:
        config = with_section(config, "sim", seed=args.seed)
    if args.ablation:
        config = apply_ablation(config, args.ablation)

    print(f"シミュレーション開始: ω={config.turn.omega} rad/s, R={config.turn.radius} m, "
          f"地形={config.terrain.kind}, seed={config.sim.seed}")

    run = None
    if args.run_name:
        try:
            run = RunManager(args.runs_dir).create_run(args.run_name, config, args.ablation or "custom", args.overwrite)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    try:
        log = SpinSimulator(config, progress_callback=print).run()
    except RunFailure as e:
        if run:
            run.mark_failed(e)
        raise

    if args.out:
        log.write_csv(args.out)
        print(f"✅ 軌跡ログを保存しました: {args.out} ({len(log)} 行)")
    if run:
        run.save_log(log)
        print(f"✅ 実行結果を保存しました: {run.run_path}")

    try:
        metrics = analyze(log, trim_seconds=config.analysis.trim_seconds)
    except InsufficientDataError as e:
        print(f"解析はスキップしました: {e}")
        return EXIT_OK

    if run:
        run.set_metrics(metrics, config.analysis.trim_seconds)
        write_run_figures(log, metrics, str(run.figures_dir))
    print(f"spin radius: {metrics.spin_radius * 1000:.3f} mm, "
          f"fit radius: {metrics.fit_radius * 1000:.3f} mm, "
          f"radial variance: {metrics.radial_variance * 1e6:.4f} mm²")
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        log = TrajectoryLog.read_csv(args.log)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read trajectory log: {e}") from e

    metrics = analyze(log, trim_seconds=args.trim_seconds)
    payload = {"log": args.log, "trim_seconds": args.trim_seconds, "metrics": metrics.to_dict()}

    if args.out:
        with open(args.out, 'w', encoding='utf-8') as f:
            json.dump(payload, f, ensure_ascii=False, indent=2)
        print(f"✅ 指標を保存しました: {args.out}")
    else:
        print(json.dumps(payload, ensure_ascii=False, indent=2))

    if args.figures:
        paths = write_run_figures(log, metrics, args.figures)
        print(f"✅ 図を保存しました: {', '.join(paths)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args.config)
    ablations = parse_names(args.ablations)
    seeds = parse_seeds(args.seeds)
    omegas = parse_floats(args.omegas) if args.omegas else ([args.omega] if args.omega is not None else None)
    terrains = parse_names(args.terrains) if args.terrains else None

    runner = SweepRunner(config, workers=args.workers, log_dir=args.log_dir)
    report = runner.run(ablations, seeds, omegas, terrains, progress_callback=print)

    if args.out:
        write_report(report, args.out)
        print(f"✅ レポートを保存しました: {args.out}")
    else:
        print(json.dumps({k: report[k] for k in ("summary", "ordering", "omega_trend")}, ensure_ascii=False, indent=2))

    if args.figure:
        write_figure(sweep_figure(report), args.figure)

    for verdict in report["ordering"]:
        if verdict["holds"] is not None:
            mark = "✅" if verdict["holds"] else "❌"
            print(f"{mark} ordering {verdict['terrain']} ω={verdict['omega']:g}: "
                  f"baseline/fkm {verdict['baseline_over_fkm']:+.1%}, fkm/asc {verdict['fkm_over_asc']:+.1%}")
    return EXIT_OK


def cmd_lqr_gain(args) -> int:
    config = _load(args.config)
    lqr = config.lqr
    tracker = LqrTracker(
        q_diag=lqr.q_diag,
        r_diag=lqr.r_diag,
        dt=lqr.dt,
        variant=lqr.b_variant,
        vr_floor=lqr.vr_floor,
        v_max=lqr.v_max,
        omega_max=lqr.omega_max,
        wheelbase=config.geometry.body_length,
    )
    solution = tracker.relinearize(config.turn.initial_yaw, config.turn.omega * config.turn.radius)

    print(f"variant = {lqr.b_variant}, dt = {lqr.dt} s, iterations = {solution.iterations}")
    print(_format_matrix("A", tracker.problem.a))
    print(_format_matrix("B", tracker.problem.b))
    print(_format_matrix("P", solution.p))
    print(_format_matrix("K", solution.k))
    print(f"spectral radius = {solution.spectral_radius:.9f}")
    return EXIT_OK


def cmd_kin(args) -> int:
    config = _load(args.config)
    geom = config.geometry
    branch = KNEE_FORWARD if args.knee == "forward" else KNEE_BACKWARD

    if args.fk:
        alpha = JointAngles(*parse_floats(args.fk, 3))
        point = forward_kinematics(geom, alpha)
        print(f"p = ({point.x:.9f}, {point.y:.9f}, {point.z:.9f}) m")
        if args.fkm:
            pair = contact_pair(geom, alpha)
            print(f"real contact  = {tuple(round(v, 9) for v in pair.real_contact.as_tuple())}")
            print(f"ideal foothold = {tuple(round(v, 9) for v in pair.ideal_foothold.as_tuple())}")
        return EXIT_OK

    target = HipFramePoint(*parse_floats(args.ik, 3))
    if args.fkm:
        solution = solve_corrected_ik(geom, target, branch, config.fkm.tolerance, config.fkm.max_iterations)
        alpha = solution.alpha
        print(f"iterations = {solution.iterations}")
    else:
        alpha = inverse_kinematics(geom, target, branch)
    print(f"alpha = ({alpha.alpha1:.9f}, {alpha.alpha2:.9f}, {alpha.alpha3:.9f}) rad")
    return EXIT_OK


def cmd_schema(args) -> int:
    print(schema_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="四脚ロボットのスピン歩行制御ツールキット")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="シミュレーションを1回実行")
    p.add_argument("--config", help="JSON設定ファイル")
    p.add_argument("--seed", type=int, help="乱数シード")
    p.add_argument("--ablation", choices=sorted(ABLATIONS), help="アブレーション")
    p.add_argument("--out", help="軌跡ログ（CSV）の出力先")
    p.add_argument("--run-name", help="実行結果として保存する名前")
    p.add_argument("--runs-dir", help="実行結果ディレクトリ（既定: SPIN_RUNS_DIR または runs）")
    p.add_argument("--overwrite", action="store_true", help="同名の実行結果を上書き")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="軌跡ログを解析")
    p.add_argument("--log", required=True, help="軌跡ログ（CSV）")
    p.add_argument("--trim-seconds", type=float, default=5.0, help="先頭から除外する時間 [s]")
    p.add_argument("--out", help="指標（JSON）の出力先")
    p.add_argument("--figures", help="図（plotly JSON）の出力ディレクトリ")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="アブレーション×シードのスイープ")
    p.add_argument("--config", help="JSON設定ファイル")
    p.add_argument("--ablations", default="baseline,fkm,asc", help="カンマ区切りのアブレーション")
    p.add_argument("--seeds", default="1..5", help="'1..5' または '1,2,3'")
    p.add_argument("--omega", type=float, help="角速度 [rad/s]")
    p.add_argument("--omegas", help="カンマ区切りの角速度 [rad/s]")
    p.add_argument("--terrains", help="カンマ区切りの地形 (flat,slope,stairs)")
    p.add_argument("--workers", type=int, default=1, help="並列プロセス数")
    p.add_argument("--log-dir", help="セルごとの軌跡ログ保存先")
    p.add_argument("--out", help="レポート（JSON）の出力先")
    p.add_argument("--figure", help="比較図（plotly JSON）の出力先")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lqr-gain", help="LQRゲインを表示")
    p.add_argument("--config", help="JSON設定ファイル")
    p.set_defaults(func=cmd_lqr_gain)

    p = sub.add_parser("kin", help="運動学のデバッグ")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--fk", help="a1,a2,a3 [rad]")
    group.add_argument("--ik", help="x,y,z [m]")
    p.add_argument("--fkm", action="store_true", help="転がり補正を使う")
    p.add_argument("--knee", choices=("backward", "forward"), default="backward")
    p.add_argument("--config", help="JSON設定ファイル")
    p.set_defaults(func=cmd_kin)

    p = sub.add_parser("schema", help="設定スキーマを表示")
    p.set_defaults(func=cmd_schema)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        return args.func(args)
    except ConfigError as e:
        print(f"❌ 設定エラー: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as e:
        print(f"❌ データ不足: {e}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (RunFailure, KinematicsError) as e:
        print(f"❌ 実行失敗: {e}", file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
