"""
例外定義モジュール
スピン制御ツールキット全体で使う例外クラスをまとめる
"""

from typing import Optional


class SpinControlError(Exception):
    """ツールキット共通の基底例外"""


class ConfigError(SpinControlError, ValueError):
    """設定ファイルの読み込み・検証エラー"""


class KinematicsError(SpinControlError, ValueError):
    """運動学計算のエラー"""


class UnreachableError(KinematicsError):
    """目標点が脚の可動範囲外"""


class SingularError(KinematicsError):
    """目標点が股関節ロール軸上にあり、α1が定まらない"""


class DegenerateFitError(SpinControlError, ValueError):
    """平面・円フィッティングが退化している（共線など）"""


class DegenerateSupportError(SpinControlError, ValueError):
    """支持脚が不足しており支持多角形を構成できない"""


class SingularLinearizationError(SpinControlError, ValueError):
    """線形化モデルが特異（cos γ や cos δ がほぼ0）"""


class InsufficientDataError(SpinControlError, ValueError):
    """解析に必要なデータが不足している"""


class RunFailure(SpinControlError, RuntimeError):
    """シミュレーション実行の失敗"""


class NoConvergenceError(RunFailure):
    """反復計算が収束しなかった"""

    def __init__(self, message: str, controllability_rank: Optional[int] = None):
        super().__init__(message)
        self.controllability_rank = controllability_rank


class FallDetectedError(RunFailure):
    """転倒判定（姿勢角または支持対角線からの逸脱）"""

    def __init__(self, tick: int, reason: str):
        super().__init__(f"Fall detected at tick {tick}: {reason}")
        self.tick = tick
        self.reason = reason
