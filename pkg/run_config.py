"""
実行設定モジュール
JSON設定ファイルを読み込み、各モジュールの設定データクラスに変換する。
未知のキーは拒否し、全ての物理量の単位をスキーマに記載する
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Tuple

from errors import ConfigError
from leg_kinematics import JointLimits, LegGeometry

SCHEMA_VERSION = 1

# セクション → キー → (単位, 説明)
CONFIG_SCHEMA: Dict[str, Dict[str, Tuple[str, str]]] = {
    "geometry": {
        "l_thigh": ("m", "thigh link length L2"),
        "l_calf": ("m", "calf link length L3"),
        "foot_radius": ("m", "spherical foot radius r"),
        "body_length": ("m", "front-to-back hip spacing L"),
        "body_width": ("m", "left-to-right hip spacing W"),
        "joint_limits": ("rad", "per-joint [lo, hi] box for alpha1, alpha2, alpha3 (enforced on stance legs)"),
    },
    "fkm": {
        "enabled": ("bool", "apply the rolling-foot kinematic correction"),
        "tolerance": ("m", "corrected IK residual tolerance"),
        "max_iterations": ("count", "corrected IK iteration cap"),
    },
    "gait": {
        "cycle_period": ("s", "trot cycle period T"),
        "duty": ("1", "stance duty factor"),
        "swing_height": ("m", "swing apex height"),
    },
    "turn": {
        "radius": ("m", "turning radius R (0 = spin in place)"),
        "omega": ("rad/s", "yaw rate"),
        "center": ("m", "start position [x, y] of the body center"),
        "initial_yaw": ("rad", "initial body heading"),
    },
    "terrain": {
        "kind": ("enum", "flat | slope | stairs"),
        "slope_pitch_deg": ("deg", "slope inclination along +x"),
        "stair_rise": ("m", "stair step height"),
        "stair_run": ("m", "stair tread depth"),
    },
    "psp": {
        "distribution": ("enum", "gaussian | poisson | geometric"),
        "sigma": ("1", "bump width as a fraction of stance duration"),
        "standing_height": ("m", "CoM height above the fitted ground plane"),
    },
    "lqr": {
        "enabled": ("bool", "apply LQR tracking correction"),
        "q_diag": ("[m^-2, m^-2, rad^-2]", "state weights"),
        "r_diag": ("[(m/s)^-2, (rad/s)^-2]", "input weights"),
        "dt": ("s", "discretization period"),
        "b_variant": ("enum", "unicycle_consistent | as_printed"),
        "vr_floor": ("m/s", "minimum linearization speed"),
        "v_max": ("m/s", "forward speed saturation"),
        "omega_max": ("rad/s", "second-channel saturation"),
    },
    "sim": {
        "dt": ("s", "simulation tick"),
        "duration": ("s", "run duration"),
        "steps": ("count", "run length in gait steps (overrides duration when > 0)"),
        "noise_sigma": ("m", "touchdown xy noise standard deviation"),
        "noise_travel_scaling": ("bool", "scale noise with swing travel relative to 0.7 rad/s"),
        "seed": ("int", "random seed"),
        "fall_tilt": ("rad", "roll/pitch fall threshold"),
        "fall_band": ("m", "max CoM distance from the stance diagonal"),
    },
    "analysis": {
        "trim_seconds": ("s", "initial transient removed before analysis"),
    },
}


@dataclass(frozen=True)
class FkmConfig:
    enabled: bool = True
    tolerance: float = 1e-12
    max_iterations: int = 50


@dataclass(frozen=True)
class GaitConfig:
    cycle_period: float = 0.4
    duty: float = 0.5
    swing_height: float = 0.04


@dataclass(frozen=True)
class TurnConfig:
    radius: float = 0.0
    omega: float = 0.7
    center: Tuple[float, float] = (0.0, 0.0)
    initial_yaw: float = 0.0


@dataclass(frozen=True)
class TerrainConfig:
    kind: str = "flat"
    slope_pitch_deg: float = 10.0
    stair_rise: float = 0.05
    stair_run: float = 0.25


@dataclass(frozen=True)
class PspConfig:
    distribution: str = "gaussian"
    sigma: float = 0.16
    standing_height: float = 0.29


@dataclass(frozen=True)
class LqrConfig:
    enabled: bool = True
    q_diag: Tuple[float, float, float] = (10.0, 10.0, 1.0)
    r_diag: Tuple[float, float] = (0.5, 0.5)
    dt: float = 0.05
    b_variant: str = "unicycle_consistent"
    vr_floor: float = 0.05
    v_max: float = 0.5
    omega_max: float = 3.0


@dataclass(frozen=True)
class SimSettings:
    dt: float = 0.001
    duration: float = 25.0
    steps: int = 0
    noise_sigma: float = 0.001
    noise_travel_scaling: bool = True
    seed: int = 0
    fall_tilt: float = 0.6
    fall_band: float = 0.15


@dataclass(frozen=True)
class AnalysisConfig:
    trim_seconds: float = 5.0


@dataclass(frozen=True)
class SimConfig:
    """全モジュールの設定をまとめた実行設定"""

    geometry: LegGeometry = field(default_factory=LegGeometry)
    fkm: FkmConfig = field(default_factory=FkmConfig)
    gait: GaitConfig = field(default_factory=GaitConfig)
    turn: TurnConfig = field(default_factory=TurnConfig)
    terrain: TerrainConfig = field(default_factory=TerrainConfig)
    psp: PspConfig = field(default_factory=PspConfig)
    lqr: LqrConfig = field(default_factory=LqrConfig)
    sim: SimSettings = field(default_factory=SimSettings)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    @property
    def run_duration(self) -> float:
        """実行時間 [s]（steps 指定時は歩数から換算）"""
        if self.sim.steps > 0:
            return self.sim.steps * self.gait.cycle_period * self.gait.duty
        return self.sim.duration


SECTION_TYPES = {
    "geometry": LegGeometry,
    "fkm": FkmConfig,
    "gait": GaitConfig,
    "turn": TurnConfig,
    "terrain": TerrainConfig,
    "psp": PspConfig,
    "lqr": LqrConfig,
    "sim": SimSettings,
    "analysis": AnalysisConfig,
}


def _coerce(section: str, key: str, value, default):
    """デフォルト値の型に合わせて変換"""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number")
        if not math.isfinite(value):
            raise ConfigError(f"{section}.{key} must be finite")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise ConfigError(f"{section}.{key} must be a list of {len(default)} numbers")
        return tuple(_coerce(section, key, v, d) for v, d in zip(value, default))
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string")
        return value
    return value


def _build_joint_limits(value) -> JointLimits:
    if not isinstance(value, dict):
        raise ConfigError("geometry.joint_limits must be an object")
    defaults = asdict(JointLimits())
    unknown = set(value) - set(defaults)
    if unknown:
        raise ConfigError(f"Unknown keys in geometry.joint_limits: {sorted(unknown)}")
    merged = {**defaults, **value}
    limits = {
        name: _coerce("geometry.joint_limits", name, merged[name], tuple(float(v) for v in defaults[name]))
        for name in defaults
    }
    return JointLimits(**limits)


def _build_section(section: str, values: Dict):
    cls = SECTION_TYPES[section]
    if not isinstance(values, dict):
        raise ConfigError(f"Section '{section}' must be an object")

    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"Unknown keys in section '{section}': {sorted(unknown)}")

    default = cls()
    kwargs = {}
    for key, value in values.items():
        if section == "geometry" and key == "joint_limits":
            kwargs[key] = _build_joint_limits(value)
        else:
            kwargs[key] = _coerce(section, key, value, getattr(default, key))

    try:
        return replace(default, **kwargs)
    except ValueError as e:
        raise ConfigError(f"Invalid section '{section}': {e}") from e


def validate_config(config: SimConfig) -> SimConfig:
    """
    セクション間の整合性を検証

    Raises:
        ConfigError: 値が範囲外
    """
    if config.sim.dt <= 0:
        raise ConfigError("sim.dt must be positive")
    if config.run_duration <= 0:
        raise ConfigError("Run duration must be positive")
    if config.sim.noise_sigma < 0:
        raise ConfigError("sim.noise_sigma must be non-negative")
    if config.gait.cycle_period <= 0 or not 0.0 < config.gait.duty < 1.0:
        raise ConfigError("gait.cycle_period must be positive and gait.duty in (0, 1)")
    if config.sim.dt > config.gait.cycle_period * config.gait.duty:
        raise ConfigError("sim.dt must not exceed the step duration")
    if config.turn.radius < 0:
        raise ConfigError("turn.radius must be non-negative")
    if config.terrain.kind not in ("flat", "slope", "stairs"):
        raise ConfigError(f"Unknown terrain kind: {config.terrain.kind}")
    if config.psp.distribution not in ("gaussian", "poisson", "geometric"):
        raise ConfigError(f"Unknown psp.distribution: {config.psp.distribution}")
    if config.psp.sigma <= 0:
        raise ConfigError("psp.sigma must be positive")
    if config.lqr.b_variant not in ("unicycle_consistent", "as_printed"):
        raise ConfigError(f"Unknown lqr.b_variant: {config.lqr.b_variant}")
    if config.lqr.dt <= 0:
        raise ConfigError("lqr.dt must be positive")
    if min(config.lqr.r_diag) <= 0 or min(config.lqr.q_diag) < 0:
        raise ConfigError("lqr.r_diag must be positive and lqr.q_diag non-negative")
    if config.fkm.max_iterations < 1:
        raise ConfigError("fkm.max_iterations must be at least 1")
    return config


def config_from_dict(data: Dict) -> SimConfig:
    """
    辞書から SimConfig を作成

    Args:
        data: 設定ファイルの内容

    Returns:
        SimConfig

    Raises:
        ConfigError: スキーマ違反
    """
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a JSON object")

    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {version} (expected {SCHEMA_VERSION})")

    sections = {k: v for k, v in data.items() if k != "schema_version"}
    unknown = set(sections) - set(SECTION_TYPES)
    if unknown:
        raise ConfigError(f"Unknown configuration sections: {sorted(unknown)}")

    built = {name: _build_section(name, values) for name, values in sections.items()}
    return validate_config(SimConfig(**built))


def config_to_dict(config: SimConfig) -> Dict:
    """SimConfig を JSON 化できる辞書に変換"""
    data = {"schema_version": SCHEMA_VERSION}
    for name in SECTION_TYPES:
        section = asdict(getattr(config, name))
        data[name] = {
            key: (list(value) if isinstance(value, tuple) else value)
            for key, value in section.items()
        }
    limits = data["geometry"]["joint_limits"]
    data["geometry"]["joint_limits"] = {k: list(v) for k, v in limits.items()}
    return data


def load_config(path: str) -> SimConfig:
    """
    設定ファイルを読み込む

    Args:
        path: JSON設定ファイルのパス

    Returns:
        SimConfig

    Raises:
        ConfigError: ファイルが読めない、またはスキーマ違反
    """
    config_path = Path(path)
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {config_path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file is not valid JSON: {config_path} - {e}") from e
    return config_from_dict(data)


def save_config(config: SimConfig, path: str):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config_to_dict(config), f, ensure_ascii=False, indent=2)


def with_section(config: SimConfig, section: str, **changes) -> SimConfig:
    """
    1セクションだけ変更したコピーを返す

    Args:
        config: 元の設定
        section: セクション名
        **changes: 変更するキーと値

    Returns:
        新しい SimConfig
    """
    if section not in SECTION_TYPES:
        raise ConfigError(f"Unknown configuration section: {section}")
    current = getattr(config, section)
    known = {f.name for f in fields(current)}
    unknown = set(changes) - known
    if unknown:
        raise ConfigError(f"Unknown keys in section '{section}': {sorted(unknown)}")
    try:
        updated = replace(current, **changes)
    except ValueError as e:
        raise ConfigError(f"Invalid section '{section}': {e}") from e
    return validate_config(replace(config, **{section: updated}))


def schema_table() -> str:
    """設定スキーマの一覧表（CLI表示用）"""
    defaults = config_to_dict(SimConfig())
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for section, keys in CONFIG_SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (unit, description) in keys.items():
            lines.append(f"  {key:<22} {json.dumps(defaults[section][key]):<28} [{unit}] {description}")
    return "\n".join(lines)
