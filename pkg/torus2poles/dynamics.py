"""测地流模块 - 双曲角坐标下的类时测地线、零曲线、Jacobi 场与旋转数"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .config import SolverSettings
from .errors import SolverInconsistencyError, StopUnreachableError
from .profile import ProfileFn

console = Console()

DEFAULT_SOLVER = SolverSettings()

# 事件在 τ = 0 处的伪零点（j(0) = 0）
_START_GUARD = 1e-8


@dataclass(frozen=True)
class PhaseState:
    """单位未来观察者丛中的点 (t, x, ψ, τ)"""

    t: float
    x: float
    psi: float
    tau: float = 0.0

    def velocity(self, f: ProfileFn) -> Tuple[float, float]:
        """(ṫ, ẋ) = (cosh ψ / f(x), sinh ψ)"""
        return math.cosh(self.psi) / f.value(self.x), math.sinh(self.psi)

    @property
    def point(self) -> Tuple[float, float]:
        return (self.t, self.x)

    def to_dict(self) -> dict:
        return {"t": self.t, "x": self.x, "psi": self.psi, "tau": self.tau}


@dataclass(frozen=True)
class StoppingCondition:
    """积分停止条件：tau ≥ T、t ≥ t₁、x ≥ x₁ 或 x ≤ x₁"""

    kind: str
    value: float

    @classmethod
    def tau(cls, horizon: float) -> "StoppingCondition":
        return cls("tau", float(horizon))

    @classmethod
    def time(cls, t1: float) -> "StoppingCondition":
        return cls("t", float(t1))

    @classmethod
    def x_at_least(cls, x1: float) -> "StoppingCondition":
        return cls("x_up", float(x1))

    @classmethod
    def x_at_most(cls, x1: float) -> "StoppingCondition":
        return cls("x_down", float(x1))


def clairaut(f: ProfileFn, s: PhaseState) -> float:
    """Clairaut 常数 C = f(x)·cosh ψ"""
    return f.value(s.x) * math.cosh(s.psi)


def unit_speed_defect(f: ProfileFn, s: PhaseState) -> float:
    """由 ψ 重建的速度满足 g_f(v, v) = -1，返回 |g_f(v, v) + 1|"""
    fx = f.value(s.x)
    tdot, xdot = s.velocity(f)
    return abs(-(fx * tdot) ** 2 + xdot**2 + 1.0)


def time_reflect(s: PhaseState) -> PhaseState:
    """等距 t ↦ -t 作用在反向测地线上：(t, x, ψ) ↦ (-t, x, -ψ)"""
    return PhaseState(t=-s.t, x=s.x, psi=-s.psi, tau=0.0)


class GeodesicPath:
    """
    密集采样的单位速度类时测地线

    samples 按 τ 严格递增；state_at(τ) 通过积分器的稠密输出回答区间内任意 τ。
    offset 用于甲板平移后的副本（共享同一个稠密输出）。
    """

    def __init__(
        self,
        profile: ProfileFn,
        tau: np.ndarray,
        t: np.ndarray,
        x: np.ndarray,
        psi: np.ndarray,
        dense=None,
        drift_bound: float = DEFAULT_SOLVER.drift_bound,
        offset: Tuple[float, float] = (0.0, 0.0),
        event_residual: float = 0.0,
    ):
        self.profile = profile
        self.tau = np.asarray(tau, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.psi = np.asarray(psi, dtype=float)
        self.dense = dense
        self.drift_bound = drift_bound
        self.offset = offset
        self.event_residual = event_residual
        fx = profile.value(self.x)
        c_values = fx * np.cosh(self.psi)
        self.clairaut = float(c_values[0])
        self.drift = float(np.max(np.abs(c_values - self.clairaut)) / self.clairaut)

    @property
    def start(self) -> PhaseState:
        return PhaseState(float(self.t[0]), float(self.x[0]), float(self.psi[0]), float(self.tau[0]))

    @property
    def end(self) -> PhaseState:
        return PhaseState(float(self.t[-1]), float(self.x[-1]), float(self.psi[-1]), float(self.tau[-1]))

    @property
    def length(self) -> float:
        """单位速度下 Lorentz 弧长等于 Δτ"""
        return float(self.tau[-1] - self.tau[0])

    @property
    def samples(self) -> List[PhaseState]:
        return [
            PhaseState(float(t), float(x), float(p), float(s))
            for t, x, p, s in zip(self.t, self.x, self.psi, self.tau)
        ]

    def state_at(self, tau: float) -> PhaseState:
        """任意 τ ∈ [τ₀, τ₁] 处的状态"""
        if not self.tau[0] - 1e-12 <= tau <= self.tau[-1] + 1e-12:
            raise ValueError(f"τ={tau} 超出路径范围 [{self.tau[0]}, {self.tau[-1]}]")
        if self.dense is None:
            t = np.interp(tau, self.tau, self.t)
            x = np.interp(tau, self.tau, self.x)
            psi = np.interp(tau, self.tau, self.psi)
        else:
            t, x, psi = self.dense(tau)[:3]
            t += self.offset[0]
            x += self.offset[1]
        return PhaseState(float(t), float(x), float(psi), float(tau))

    def polyline(self, n: int = 400) -> np.ndarray:
        """按 τ 均匀重采样为 (n, 2) 的 (t, x) 折线"""
        if self.dense is None or len(self.tau) < 2:
            return np.column_stack([self.t, self.x])
        taus = np.linspace(self.tau[0], self.tau[-1], n)
        y = self.dense(taus)
        return np.column_stack([y[0] + self.offset[0], y[1] + self.offset[1]])

    def translated(self, dt: float, dx: float, dtau: float = 0.0) -> "GeodesicPath":
        """甲板平移 (t, x) ↦ (t + dt, x + dx) 下的像，τ 可一并平移"""
        path = GeodesicPath(
            self.profile,
            self.tau + dtau,
            self.t + dt,
            self.x + dx,
            self.psi,
            dense=None if self.dense is None else _ShiftedDense(self.dense, dtau),
            drift_bound=self.drift_bound,
            offset=(self.offset[0] + dt, self.offset[1] + dx),
            event_residual=self.event_residual,
        )
        return path

    def to_dict(self) -> dict:
        return {
            "start": self.start.to_dict(),
            "end": self.end.to_dict(),
            "length": self.length,
            "clairaut": self.clairaut,
            "drift": self.drift,
            "n_samples": int(len(self.tau)),
        }


class _ShiftedDense:
    """τ 平移后的稠密输出"""

    def __init__(self, dense, dtau: float):
        self.dense = dense
        self.dtau = dtau

    def __call__(self, tau):
        return self.dense(np.asarray(tau) - self.dtau)


@dataclass(frozen=True)
class NullPath:
    """零曲线 X±，以 t 为参数（未来定向）"""

    branch: str
    t: np.ndarray
    x: np.ndarray
    event_residual: float = 0.0

    @property
    def end(self) -> Tuple[float, float]:
        return float(self.t[-1]), float(self.x[-1])


@dataclass(frozen=True)
class RotationNumbers:
    """两条零叶状结构的旋转数 (m⁻, m⁺) 及零曲线交叉验证结果"""

    m_minus: float
    m_plus: float
    null_period: float
    oracle_minus: float
    oracle_plus: float

    @property
    def cross_check(self) -> float:
        return max(abs(self.m_minus - self.oracle_minus), abs(self.m_plus - self.oracle_plus))

    @property
    def is_class_a(self) -> bool:
        return self.m_plus != self.m_minus

    def to_dict(self) -> dict:
        return {
            "m_minus": self.m_minus,
            "m_plus": self.m_plus,
            "null_period": self.null_period,
            "oracle_minus": self.oracle_minus,
            "oracle_plus": self.oracle_plus,
            "cross_check": self.cross_check,
            "class_a": self.is_class_a,
        }


def _tau_rhs(f: ProfileFn):
    def rhs(tau, y):
        fx, f1, _ = f.eval(y[1])
        # 试探步可能把 ψ 推到溢出区，返回 inf 让积分器缩步
        ch = np.cosh(y[2])
        return [ch / fx, np.sinh(y[2]), -(f1 / fx) * ch]

    return rhs


def flow(
    f: ProfileFn,
    s0: PhaseState,
    stop: StoppingCondition,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> GeodesicPath:
    """
    积分一阶系统 ṫ = cosh ψ / f, ẋ = sinh ψ, ψ̇ = -(f'/f)·cosh ψ

    Args:
        f: 剖面
        s0: 初始状态
        stop: 停止条件
        settings: 求解器参数

    Returns:
        恰好终止于停止事件的 GeodesicPath

    Raises:
        StopUnreachableError: x 停止条件在 τ 预算内未到达
        SolverInconsistencyError: Clairaut 漂移超过界限
    """
    y0 = [s0.t, s0.x, s0.psi]
    events = None
    if stop.kind == "tau":
        span = (s0.tau, s0.tau + stop.value)
    elif stop.kind == "t":
        if s0.t >= stop.value:
            return _single_sample(f, s0, settings)
        # ṫ ≥ 1/f_max，因此 t 停止条件必在该 τ 内到达
        reach = f.f_max * (stop.value - s0.t)
        span = (s0.tau, s0.tau + reach * (1.0 + 1e-9) + 1e-9)
        events = _event(lambda tau, y: y[0] - stop.value, +1)
    elif stop.kind in ("x_up", "x_down"):
        if (stop.kind == "x_up" and s0.x >= stop.value) or (stop.kind == "x_down" and s0.x <= stop.value):
            return _single_sample(f, s0, settings)
        span = (s0.tau, s0.tau + settings.tau_budget)
        direction = +1 if stop.kind == "x_up" else -1
        events = _event(lambda tau, y: y[1] - stop.value, direction)
    else:
        raise ValueError(f"未知的停止条件: {stop.kind}")

    sol = _integrate(_tau_rhs(f), span, y0, settings, dense_output=True, events=events)
    if sol.status < 0:
        raise SolverInconsistencyError(f"测地线积分失败: {sol.message}")

    residual = 0.0
    if stop.kind == "t" and sol.status == 1:
        residual = abs(sol.y[0, -1] - stop.value)
    elif stop.kind in ("x_up", "x_down"):
        if sol.status != 1:
            partial = GeodesicPath(f, sol.t, sol.y[0], sol.y[1], sol.y[2], sol.sol, settings.drift_bound)
            raise StopUnreachableError(
                f"x = {stop.value} 在 τ 预算 {settings.tau_budget} 内不可达", partial_path=partial
            )
        residual = abs(sol.y[1, -1] - stop.value)

    path = GeodesicPath(
        f,
        sol.t,
        sol.y[0],
        sol.y[1],
        sol.y[2],
        dense=sol.sol,
        drift_bound=settings.drift_bound,
        event_residual=residual,
    )
    if path.drift > settings.drift_bound:
        raise SolverInconsistencyError(
            f"Clairaut 漂移 {path.drift:.3e} 超过界限 {settings.drift_bound:.1e}（{f.label}, s0={s0}）"
        )
    return path


def _integrate(rhs, span, y0, settings: SolverSettings, **options):
    """solve_ivp 包装：试探步中的 inf/nan 不报警，由步长控制拒绝该步"""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return solve_ivp(rhs, span, y0, method=settings.method, rtol=settings.rtol, atol=settings.atol, **options)


def _event(fun, direction: int):
    fun.terminal = True
    fun.direction = direction
    return fun


def _single_sample(f: ProfileFn, s0: PhaseState, settings: SolverSettings) -> GeodesicPath:
    return GeodesicPath(f, [s0.tau], [s0.t], [s0.x], [s0.psi], dense=None, drift_bound=settings.drift_bound)


def _fan_rhs(f: ProfileFn, n: int):
    def rhs(t, y):
        x = y[:n]
        psi = y[n : 2 * n]
        fx, f1, _ = f.eval(x)
        return np.concatenate([fx * np.tanh(psi), -f1, fx / np.cosh(psi)])

    return rhs


def flow_fan(
    f: ProfileFn,
    origin: Tuple[float, float],
    psi0s: Sequence[float],
    t_ends: Sequence[float],
    settings: SolverSettings = DEFAULT_SOLVER,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    同一起点、不同初始双曲角的一束测地线，以 t 为自变量整体积分

    dx/dt = f·tanh ψ, dψ/dt = -f'(x), dτ/dt = f / cosh ψ

    Args:
        f: 剖面
        origin: 起点 (t₀, x₀)
        psi0s: 初始双曲角数组
        t_ends: 需要输出的时刻（均 ≥ t₀）

    Returns:
        (x, ψ, τ)，形状均为 (len(t_ends), len(psi0s))
    """
    psi0s = np.asarray(psi0s, dtype=float)
    t_ends = np.asarray(t_ends, dtype=float)
    n = len(psi0s)
    t0, x0 = origin
    y0 = np.concatenate([np.full(n, float(x0)), psi0s, np.zeros(n)])
    # t_ends 可以重复或早于 t₀；只对去重后的时刻积分，再按 inverse 散回
    eval_times, inverse = np.unique(np.maximum(t_ends, t0), return_inverse=True)
    inverse = np.ravel(inverse)
    if eval_times[-1] <= t0:
        out = np.tile(y0, (len(t_ends), 1))
    else:
        sol = _integrate(_fan_rhs(f, n), (t0, float(eval_times[-1])), y0, settings, t_eval=eval_times)
        if sol.status < 0:
            raise SolverInconsistencyError(f"测地线束积分失败: {sol.message}")
        out = sol.y.T[inverse]
    return out[:, :n], out[:, n : 2 * n], out[:, 2 * n :]


def shoot(
    f: ProfileFn,
    origin: Tuple[float, float],
    psi0: float,
    t_end: float,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> Tuple[float, float, float]:
    """单条测地线积分到 t = t_end，返回 (x, ψ, τ)"""
    x, psi, tau = flow_fan(f, origin, [psi0], [t_end], settings)
    return float(x[0, 0]), float(psi[0, 0]), float(tau[0, 0])


def _tau_stack_rhs(f: ProfileFn, n: int):
    def rhs(tau, y):
        x = y[n : 2 * n]
        psi = y[2 * n :]
        fx, f1, _ = f.eval(x)
        ch = np.cosh(psi)
        return np.concatenate([ch / fx, np.sinh(psi), -(f1 / fx) * ch])

    return rhs


def flow_stack(
    f: ProfileFn,
    states: Sequence[PhaseState],
    horizon: float,
    settings: SolverSettings = DEFAULT_SOLVER,
    taus: Optional[Sequence[float]] = None,
):
    """
    多条测地线按 τ 整体积分（共享步长，差分误差相关）

    Returns:
        taus 给定时返回 (t, x, ψ)，形状 (len(taus), n)；否则返回稠密输出
    """
    n = len(states)
    y0 = np.array([s.t for s in states] + [s.x for s in states] + [s.psi for s in states])
    sol = _integrate(
        _tau_stack_rhs(f, n),
        (0.0, float(horizon)),
        y0,
        settings,
        dense_output=taus is None,
        t_eval=None if taus is None else np.asarray(taus, dtype=float),
    )
    if sol.status < 0:
        raise SolverInconsistencyError(f"测地线组积分失败: {sol.message}")
    if taus is None:
        return sol.sol
    y = sol.y.T
    return y[:, :n], y[:, n : 2 * n], y[:, 2 * n :]


def curvature_term(f: ProfileFn, x):
    """Jacobi 方程 j'' + κ j = 0 中的 κ = f''(x) / f(x)"""
    fx, _, f2 = f.eval(x)
    return f2 / fx


def jacobi_zeros(
    f: ProfileFn,
    s0: PhaseState,
    horizon: float,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> List[float]:
    """
    垂直 Jacobi 标量 j（j(0)=0, j'(0)=1）在 (0, T] 内的零点

    Args:
        f: 剖面
        s0: 测地线初始状态
        horizon: T > 0

    Returns:
        按 τ 递增的共轭点参数列表
    """
    if horizon <= 0:
        raise ValueError("horizon 必须为正")

    def rhs(tau, y):
        fx, f1, f2 = f.eval(y[1])
        ch = np.cosh(y[2])
        return [ch / fx, np.sinh(y[2]), -(f1 / fx) * ch, y[4], -(f2 / fx) * y[3]]

    def crossing(tau, y):
        return y[3]

    sol = _integrate(rhs, (0.0, float(horizon)), [s0.t, s0.x, s0.psi, 0.0, 1.0], settings, events=crossing)
    if sol.status < 0:
        raise SolverInconsistencyError(f"Jacobi 方程积分失败: {sol.message}")
    guard = _START_GUARD * max(1.0, horizon)
    return [float(tau) for tau in sol.t_events[0] if tau > guard]


def focusing_times(
    f: ProfileFn,
    s0: PhaseState,
    horizon: float,
    h: float = 1e-6,
    settings: SolverSettings = DEFAULT_SOLVER,
    samples_per_unit: int = 50,
) -> List[float]:
    """
    差分扩散预言：ψ₀ ± h 的两条测地线分离量（投影到法向并除以 2h）的零点

    与 jacobi_zeros 互相独立，用于确定 κ 的符号约定。
    """
    states = [
        PhaseState(s0.t, s0.x, s0.psi - h),
        PhaseState(s0.t, s0.x, s0.psi),
        PhaseState(s0.t, s0.x, s0.psi + h),
    ]
    dense = flow_stack(f, states, horizon, settings)

    def spread(tau):
        y = np.asarray(dense(tau))
        t, x, psi = y[0:3], y[3:6], y[6:9]
        fx = f.value(x[1])
        # 法向 n = (sinh ψ / f, cosh ψ)，j = g(δγ, n)
        return (-fx * math.sinh(psi[1]) * (t[2] - t[0]) + math.cosh(psi[1]) * (x[2] - x[0])) / (2.0 * h)

    n = max(int(samples_per_unit * horizon), 16)
    taus = np.linspace(0.0, horizon, n + 1)[1:]
    values = [spread(tau) for tau in taus]
    zeros = []
    for a, b, va, vb in zip(taus[:-1], taus[1:], values[:-1], values[1:]):
        if va == 0.0:
            zeros.append(float(a))
        elif va * vb < 0:
            zeros.append(float(brentq(spread, a, b, xtol=1e-12)))
    return zeros


def null_flow(
    f: ProfileFn,
    p: Tuple[float, float],
    branch: str,
    stop: StoppingCondition,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> NullPath:
    """
    积分零曲线 dx/dt = +f(x)（plus）或 -f(x)（minus），未来定向

    stop 为 StoppingCondition.time(t₁) 或 x 停止条件（x 到达 x₁）。
    """
    if branch not in ("plus", "minus"):
        raise ValueError(f"未知的零曲线分支: {branch}")
    sign = 1.0 if branch == "plus" else -1.0
    t0, x0 = float(p[0]), float(p[1])

    def rhs(t, y):
        return [sign * f.value(y[0])]

    events = None
    if stop.kind == "t":
        span = (t0, stop.value)
    else:
        if (stop.value - x0) * sign < 0:
            raise StopUnreachableError(f"{branch} 零曲线不会到达 x = {stop.value}")
        # |dx/dt| ≥ f_min
        span = (t0, t0 + abs(stop.value - x0) / f.f_min * (1.0 + 1e-9) + 1e-9)
        events = _event(lambda t, y: y[0] - stop.value, 0)
    if span[1] <= span[0]:
        return NullPath(branch, np.array([t0]), np.array([x0]))

    sol = _integrate(rhs, span, [x0], settings, events=events)
    if sol.status < 0:
        raise SolverInconsistencyError(f"零曲线积分失败: {sol.message}")
    residual = 0.0
    if events is not None:
        if sol.status != 1:
            raise SolverInconsistencyError(f"零曲线未在理论时间内到达 x = {stop.value}")
        residual = abs(sol.y[0, -1] - stop.value)
    return NullPath(branch, sol.t, sol.y[0], residual)


def null_path_residual(f: ProfileFn, path: NullPath) -> float:
    """逐步比较 Δt 与 ∫dx/f，返回最大偏差"""
    worst = 0.0
    for i in range(len(path.t) - 1):
        dt = path.t[i + 1] - path.t[i]
        expected = abs(f.inverse_integral(path.x[i], path.x[i + 1]))
        worst = max(worst, abs(dt - expected))
    return worst


def rotation_numbers(
    f: ProfileFn,
    settings: SolverSettings = DEFAULT_SOLVER,
    oracle_span: float = 1e3,
) -> RotationNumbers:
    """
    m± = ±1/P，并用长时间零曲线位移交叉验证

    预言走整数个周期，保证 Δx/Δt 不受周期内相位影响。
    """
    period = f.null_period
    n_periods = max(1, math.ceil(oracle_span / period))
    plus = null_flow(f, (0.0, 0.0), "plus", StoppingCondition.x_at_least(float(n_periods)), settings)
    minus = null_flow(f, (0.0, 0.0), "minus", StoppingCondition.x_at_most(-float(n_periods)), settings)
    return RotationNumbers(
        m_minus=-1.0 / period,
        m_plus=1.0 / period,
        null_period=period,
        oracle_minus=-n_periods / measure_elapsed_time(minus),
        oracle_plus=n_periods / measure_elapsed_time(plus),
    )


def measure_elapsed_time(path: NullPath) -> float:
    return float(path.t[-1] - path.t[0])
