"""
LQR軌道追従モジュール

参照経路の目標点探索、ユニサイクルモデルの線形化と離散化、
離散リカッチ方程式の反復解法、追従補正を提供
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from errors import NoConvergenceError, SingularLinearizationError

B_VARIANTS = ("unicycle_consistent", "as_printed")


@dataclass(frozen=True)
class ReferencePath:
    """
    サンプル点列で表した参照経路

    Args:
        points: (n, 2) 経路点 [m]
        speeds: (n,) 目標速度 [m/s]
    """

    points: np.ndarray
    speeds: np.ndarray
    headings: np.ndarray = field(init=False, repr=False)
    curvature_radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        speeds = np.broadcast_to(np.asarray(self.speeds, dtype=float), (len(points),)).copy()
        if points.ndim != 2 or points.shape[1] != 2 or len(points) == 0:
            raise ValueError("Reference path needs an (n, 2) array of samples")

        if len(points) >= 3:
            d1 = np.gradient(points, axis=0, edge_order=2)
            d2 = np.gradient(d1, axis=0, edge_order=2)
        else:
            d1 = np.tile(points[-1] - points[0], (len(points), 1))
            d2 = np.zeros_like(points)

        headings = np.arctan2(d1[:, 1], d1[:, 0])
        speed = np.hypot(d1[:, 0], d1[:, 1])
        cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        straight = cross <= 1e-12 * speed ** 3
        with np.errstate(divide="ignore", invalid="ignore"):
            radii = np.where(straight, np.inf, speed ** 3 / cross)

        object.__setattr__(self, "points", points)
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "headings", headings)
        object.__setattr__(self, "curvature_radii", radii)


@dataclass(frozen=True)
class SpinPoint:
    """その場スピンの参照（中心と角速度）"""

    center: Tuple[float, float]
    omega: float
    theta0: float = 0.0


@dataclass(frozen=True)
class GoalPoint:
    index: int
    point: np.ndarray
    heading: float
    curvature_radius: float
    speed: float


@dataclass(frozen=True)
class ControlInput:
    """
    制御入力

    second は unicycle_consistent では角速度 ω、as_printed では操舵角 δ。
    omega は常にプラントへ渡す角速度。
    """

    v: float
    second: float
    omega: float
    reference: Tuple[float, float]
    correction: Tuple[float, float]


@dataclass(frozen=True)
class LqrProblem:
    """
    LQR問題

    discrete=False なら a, b は連続時間行列で、dt で前進オイラー離散化する。
    """

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray
    dt: float = 1.0
    discrete: bool = False

    @property
    def a_d(self) -> np.ndarray:
        return np.asarray(self.a, float) if self.discrete else discretize(self.a, self.b, self.dt)[0]

    @property
    def b_d(self) -> np.ndarray:
        return np.asarray(self.b, float) if self.discrete else discretize(self.a, self.b, self.dt)[1]


@dataclass(frozen=True)
class LqrSolution:
    p: np.ndarray
    k: np.ndarray
    iterations: int
    spectral_radius: float

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0


def circle_path(
    start: Tuple[float, float],
    heading: float,
    radius: float,
    speed: float,
    samples: int = 3600
) -> ReferencePath:
    """
    開始姿勢で接する左回りの円経路

    Args:
        start: 開始位置 [m]
        heading: 開始時の進行方向 [rad]
        radius: 旋回半径 [m]
        speed: 目標速度 [m/s]
        samples: 1周あたりのサンプル数

    Returns:
        ReferencePath
    """
    if radius <= 0:
        raise ValueError("circle_path needs a positive radius")
    center = np.array(start) + radius * np.array([-math.sin(heading), math.cos(heading)])
    angles = heading - math.pi / 2 + np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    points = center + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return ReferencePath(points=points, speeds=np.full(samples, speed))


def goal_point(
    path: Union[ReferencePath, SpinPoint],
    com: Tuple[float, float],
    t: float = 0.0
) -> GoalPoint:
    """
    現在の重心に最も近い経路点を探す

    SpinPoint の場合は中心と θ0 + ω·t を返す。

    Args:
        path: 参照経路
        com: 重心の xy [m]
        t: 時刻 [s]（SpinPoint のみ使用）

    Returns:
        GoalPoint
    """
    if isinstance(path, SpinPoint):
        return GoalPoint(
            index=0,
            point=np.asarray(path.center, dtype=float),
            heading=path.theta0 + path.omega * t,
            curvature_radius=0.0,
            speed=0.0,
        )

    distances = np.hypot(path.points[:, 0] - com[0], path.points[:, 1] - com[1])
    index = int(np.argmin(distances))
    return GoalPoint(
        index=index,
        point=path.points[index].copy(),
        heading=float(path.headings[index]),
        curvature_radius=float(path.curvature_radii[index]),
        speed=float(path.speeds[index]),
    )


def wrap_angle(angle: float) -> float:
    """(−π, π] に折り返す"""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def tracking_error(state: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """追従誤差 X̃ = X − X_r（ヨーは折り返し）"""
    error = np.asarray(state, dtype=float) - np.asarray(reference, dtype=float)
    error[2] = wrap_angle(error[2])
    return error


def linearize(
    gamma_r: float,
    v_r: float,
    delta_r: float = 0.0,
    variant: str = "unicycle_consistent"
) -> Tuple[np.ndarray, np.ndarray]:
    """
    参照点まわりの線形化

    Args:
        gamma_r: 参照ヨー角 [rad]
        v_r: 参照速度 [m/s]
        delta_r: 参照操舵角 [rad]（as_printed のみ）
        variant: unicycle_consistent / as_printed

    Returns:
        (A, B) 連続時間行列

    Raises:
        SingularLinearizationError: as_printed で cos γ または cos δ がほぼ0
    """
    if variant not in B_VARIANTS:
        raise ValueError(f"Unknown B-matrix variant: {variant}")

    c, s = math.cos(gamma_r), math.sin(gamma_r)
    a = np.array([
        [0.0, 0.0, -v_r * s],
        [0.0, 0.0, v_r * c],
        [0.0, 0.0, 0.0],
    ])

    if variant == "unicycle_consistent":
        b = np.array([[c, 0.0], [s, 0.0], [0.0, 1.0]])
        return a, b

    if abs(c) < 1e-6 or abs(math.cos(delta_r)) < 1e-6:
        raise SingularLinearizationError(
            f"as_printed linearization is singular at gamma={gamma_r}, delta={delta_r}"
        )
    b = np.array([[c, 0.0], [s, 0.0], [math.tan(gamma_r), v_r / math.cos(delta_r)]])
    return a, b


def discretize(a: np.ndarray, b: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """前進オイラー離散化: A_d = I + A·dt, B_d = B·dt"""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = np.asarray(a, dtype=float)
    return np.eye(a.shape[0]) + a * dt, np.asarray(b, dtype=float) * dt


def controllability_rank(a_d: np.ndarray, b_d: np.ndarray) -> int:
    blocks = [b_d]
    for _ in range(a_d.shape[0] - 1):
        blocks.append(a_d @ blocks[-1])
    return int(np.linalg.matrix_rank(np.hstack(blocks)))


def _check_weights(q: np.ndarray, r: np.ndarray):
    if np.min(np.linalg.eigvalsh(0.5 * (q + q.T))) < -1e-12:
        raise ValueError("Q must be positive semidefinite")
    if np.min(np.linalg.eigvalsh(0.5 * (r + r.T))) <= 0:
        raise ValueError("R must be positive definite")


def _riccati_update(p, a_d, b_d, q, r):
    btp = b_d.T @ p
    gain = np.linalg.solve(r + btp @ b_d, btp @ a_d)
    p_next = q + a_d.T @ p @ a_d - a_d.T @ p @ b_d @ gain
    return 0.5 * (p_next + p_next.T)


def _apply_power(a_k, g_k, h_k, p0):
    """f^n(P0) = H_n + A_nᵀ P0 (I + G_n P0)⁻¹ A_n"""
    p = h_k + a_k.T @ p0 @ np.linalg.solve(np.eye(len(p0)) + g_k @ p0, a_k)
    return 0.5 * (p + p.T)


def _double(a_k, g_k, h_k):
    """リカッチ写像 n 回分の (A_n, G_n, H_n) から 2n 回分を作る"""
    w = np.eye(len(a_k)) + g_k @ h_k
    w_inv_a = np.linalg.solve(w, a_k)
    a_next = a_k @ w_inv_a
    g_next = g_k + a_k @ np.linalg.solve(w, g_k) @ a_k.T
    h_next = h_k + a_k.T @ h_k @ w_inv_a
    return a_next, 0.5 * (g_next + g_next.T), 0.5 * (h_next + h_next.T)


def solve_lqr(
    problem: LqrProblem,
    initial: Optional[np.ndarray] = None,
    tolerance: float = 1e-10,
    max_iterations: int = 100_000
) -> LqrSolution:
    """
    離散リカッチ方程式を反復で解く

    P ← Q + A_dᵀ(P − P B_d (R + B_dᵀ P B_d)⁻¹ B_dᵀ P) A_d を P = Q（または initial）から
    反復し、1回更新したときの変化 ‖P_{k+1} − P_k‖_∞ が tolerance 未満になった P_k を返す。
    反復は倍化で進める（P_1, P_2, P_4, ... を順に評価）ため、iterations は2の冪になる。

    Args:
        problem: LQR問題
        initial: 反復の初期値（ウォームスタート）
        tolerance: 収束判定
        max_iterations: 反復回数の上限

    Returns:
        LqrSolution

    Raises:
        NoConvergenceError: 反復上限に達した（可制御性ランクを付記）
    """
    a_d, b_d = problem.a_d, problem.b_d
    q = np.asarray(problem.q, dtype=float)
    r = np.asarray(problem.r, dtype=float)
    _check_weights(q, r)

    p0 = q.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    a_k, g_k, h_k = a_d, b_d @ np.linalg.solve(r, b_d.T), q
    p = p0
    iterations = 0
    converged = False

    with np.errstate(over="ignore", invalid="ignore"):
        try:
            while True:
                change = np.max(np.abs(_riccati_update(p, a_d, b_d, q, r) - p))
                if change < tolerance:
                    converged = True
                    break
                next_iterations = max(1, 2 * iterations)
                if next_iterations > max_iterations:
                    break
                if iterations > 0:
                    a_k, g_k, h_k = _double(a_k, g_k, h_k)
                p = _apply_power(a_k, g_k, h_k, p0)
                iterations = next_iterations
        except np.linalg.LinAlgError:
            converged = False

    if not converged:
        rank = controllability_rank(a_d, b_d)
        raise NoConvergenceError(
            f"Riccati iteration did not converge in {max_iterations} steps "
            f"(controllability rank {rank}/{a_d.shape[0]})",
            controllability_rank=rank,
        )

    k = np.linalg.solve(r + b_d.T @ p @ b_d, b_d.T @ p @ a_d)
    radius = float(np.max(np.abs(np.linalg.eigvals(a_d - b_d @ k))))
    return LqrSolution(p=p, k=k, iterations=iterations, spectral_radius=radius)


def finite_horizon_value(problem: LqrProblem, x0: np.ndarray, horizon: int) -> float:
    """P = 0 から horizon 回の動的計画法で得た有限ホライズン最小コスト x0ᵀ P_N x0"""
    a_d, b_d = problem.a_d, problem.b_d
    q = np.asarray(problem.q, dtype=float)
    r = np.asarray(problem.r, dtype=float)
    p = np.zeros_like(q)
    for _ in range(horizon):
        p = _riccati_update(p, a_d, b_d, q, r)
    x0 = np.asarray(x0, dtype=float)
    return float(x0 @ p @ x0)


def control_correction(
    k: np.ndarray,
    error: np.ndarray,
    reference: Tuple[float, float],
    variant: str = "unicycle_consistent",
    wheelbase: float = 0.38,
    v_max: float = math.inf,
    second_max: float = math.inf,
    reference_omega: Optional[float] = None
) -> ControlInput:
    """
    ũ = K·X̃ を計算し u = u_r − ũ を返す

    Args:
        k: LQRゲイン (2, 3)
        error: 追従誤差 X̃
        reference: 参照入力 u_r = (v_r, ω_r または δ_r)
        variant: unicycle_consistent / as_printed
        wheelbase: as_printed で δ から ω を求めるときの軸距 [m]
        v_max: 速度の飽和 [m/s]
        second_max: 第2入力の飽和
        reference_omega: as_printed で参照角速度に δ の変化分を足すときの ω_r

    Returns:
        ControlInput
    """
    correction = np.asarray(k, dtype=float) @ np.asarray(error, dtype=float)
    v = float(np.clip(reference[0] - correction[0], -v_max, v_max))
    second = float(np.clip(reference[1] - correction[1], -second_max, second_max))

    if variant == "unicycle_consistent":
        omega = second
    elif reference_omega is None:
        omega = v * math.tan(second) / wheelbase
    else:
        omega = reference_omega + v * (math.tan(second) - math.tan(reference[1])) / wheelbase

    return ControlInput(
        v=v,
        second=second,
        omega=omega,
        reference=(float(reference[0]), float(reference[1])),
        correction=(float(correction[0]), float(correction[1])),
    )


def _yaw_rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class LqrTracker:
    """
    歩ごとに再線形化してゲインをキャッシュする追従器

    Args:
        q_diag: 状態重み
        r_diag: 入力重み
        dt: 離散化周期 [s]
        variant: B行列のバリアント
        vr_floor: 線形化速度の下限 [m/s]
        v_max: 速度の飽和 [m/s]
        omega_max: 角速度の飽和 [rad/s]
        wheelbase: as_printed 用の軸距 [m]
    """

    def __init__(
        self,
        q_diag: Tuple[float, float, float] = (10.0, 10.0, 1.0),
        r_diag: Tuple[float, float] = (0.5, 0.5),
        dt: float = 0.05,
        variant: str = "unicycle_consistent",
        vr_floor: float = 0.05,
        v_max: float = 0.5,
        omega_max: float = 3.0,
        wheelbase: float = 0.38
    ):
        if variant not in B_VARIANTS:
            raise ValueError(f"Unknown B-matrix variant: {variant}")
        self.q = np.diag(np.asarray(q_diag, dtype=float))
        self.r = np.diag(np.asarray(r_diag, dtype=float))
        self.dt = dt
        self.variant = variant
        self.vr_floor = vr_floor
        self.v_max = v_max
        self.omega_max = omega_max
        self.wheelbase = wheelbase

        self.solution: Optional[LqrSolution] = None
        self.problem: Optional[LqrProblem] = None
        self._gamma: Optional[float] = None

    def relinearize(self, gamma_r: float, v_r: float, delta_r: float = 0.0) -> LqrSolution:
        """
        参照ヨーで再線形化してゲインを更新

        前回の P をヨー変化分だけ回転させて初期値にする。

        Raises:
            NoConvergenceError: 収束しない、または閉ループが安定でない
        """
        a, b = linearize(gamma_r, max(v_r, self.vr_floor), delta_r, self.variant)
        problem = LqrProblem(a=a, b=b, q=self.q, r=self.r, dt=self.dt)

        initial = None
        if self.solution is not None and self.variant == "unicycle_consistent":
            rotation = _yaw_rotation(gamma_r - self._gamma)
            initial = rotation @ self.solution.p @ rotation.T

        solution = solve_lqr(problem, initial=initial)
        if not solution.stable:
            raise NoConvergenceError(
                f"Closed loop is not stable (spectral radius {solution.spectral_radius:.6f})",
                controllability_rank=controllability_rank(problem.a_d, problem.b_d),
            )

        self.problem = problem
        self.solution = solution
        self._gamma = gamma_r
        return solution

    def command(
        self,
        state: np.ndarray,
        reference_state: np.ndarray,
        reference_input: Tuple[float, float],
        reference_omega: Optional[float] = None
    ) -> ControlInput:
        """キャッシュ済みゲインで制御入力を計算"""
        if self.solution is None:
            raise RuntimeError("relinearize must be called before command")
        error = tracking_error(state, reference_state)
        return control_correction(
            self.solution.k,
            error,
            reference_input,
            variant=self.variant,
            wheelbase=self.wheelbase,
            v_max=self.v_max,
            second_max=self.omega_max,
            reference_omega=reference_omega,
        )
