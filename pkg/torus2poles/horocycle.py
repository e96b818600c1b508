"""Busemann 模块 - 中心射线、Busemann 函数、极限球面与极限球面距离检验"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from rich.console import Console
from scipy.optimize import brentq

from .causal import CHRONOLOGICAL, Point, causal_relation, distance, distance_many
from .config import SolverSettings
from .dynamics import DEFAULT_SOLVER
from .errors import SolverInconsistencyError
from .profile import ProfileFn

console = Console()

# h(s) 单调性允许的数值回升
MONOTONE_SLACK = 1e-8
VERTEX_TOL = 1e-6


@dataclass(frozen=True)
class CentralRay:
    """从 f 最大值列上的点出发、单位速度的竖直未来射线 γ(s) = (t₀ + s/f_max, x₀)"""

    base: Point
    f_max: float

    @classmethod
    def through(cls, f: ProfileFn, base: Point) -> "CentralRay":
        if not f.in_max_locus(base[1]):
            raise ValueError(f"中心射线的起点 x = {base[1]} 必须在 f 的最大值集合上")
        return cls((float(base[0]), float(base[1])), f.f_max)

    def at(self, s: float) -> Point:
        return (self.base[0] + s / self.f_max, self.base[1])


@dataclass
class BusemannResult:
    """b_γ(p) 的数值极限及收敛轨迹"""

    value: float
    converged: bool
    trace: List[Tuple[float, float]] = field(default_factory=list)
    extrapolated: List[float] = field(default_factory=list)

    @property
    def last_step(self) -> float:
        if len(self.trace) < 2:
            return float("nan")
        return abs(self.trace[-1][1] - self.trace[-2][1])

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "converged": self.converged,
            "trace": [list(item) for item in self.trace],
            "extrapolated": self.extrapolated,
        }


def busemann(
    f: ProfileFn,
    ray: CentralRay,
    p: Point,
    settings: SolverSettings = DEFAULT_SOLVER,
    s_start: float = 4.0,
    s_max: float = 16384.0,
    tol: float = 1e-6,
    extrapolate: bool = True,
) -> BusemannResult:
    """
    b_γ(p) = lim_{s→∞} [s − d(p, γ(s))]

    s 从 s_start 起倍增；h(s) 单调不增（反向三角不等式），沿轨迹断言。
    Richardson 外推 R = 2h(2s) − h(s) 消去 1/s 项，extrapolate 时返回外推值。

    Raises:
        SolverInconsistencyError: h 回升超过 1e-8，或到 s_max 仍有 p ∉ I⁻(γ(s))
    """
    p = (float(p[0]), float(p[1]))
    s = s_start
    while causal_relation(f, p, ray.at(s), settings.causal_tol) != CHRONOLOGICAL:
        s *= 2.0
        if s > s_max:
            raise SolverInconsistencyError(f"s 增至 {s_max:g} 时 {p} 仍不在 γ(s) 的时序过去中")

    result = BusemannResult(value=float("nan"), converged=False)
    while True:
        h = s - distance(f, p, ray.at(s), settings, with_paths=False).value
        if result.trace and h > result.trace[-1][1] + MONOTONE_SLACK:
            raise SolverInconsistencyError(
                f"Busemann 轨迹在 s={s:g} 处回升 {h - result.trace[-1][1]:.3e}（{p}）"
            )
        result.trace.append((s, h))
        if len(result.trace) >= 2:
            previous = result.trace[-2][1]
            result.extrapolated.append(2.0 * h - previous)
            if abs(h - previous) <= tol:
                result.converged = True
            elif extrapolate and len(result.extrapolated) >= 2:
                result.converged = abs(result.extrapolated[-1] - result.extrapolated[-2]) <= tol
        if result.converged or 2.0 * s > s_max:
            break
        s *= 2.0

    if extrapolate and result.extrapolated:
        result.value = result.extrapolated[-1]
    else:
        result.value = result.trace[-1][1]
    if not result.converged:
        console.print(f"[yellow]⚠ b_γ{p} 在 s ≤ {s_max:g} 内未收敛（最后一步差 {result.last_step:.3e}）[/yellow]")
    return result


@lru_cache(maxsize=4096)
def busemann_value(f: ProfileFn, ray: CentralRay, p: Point, settings: SolverSettings, options: tuple = ()) -> float:
    """带缓存的 b_γ(p)（同一 x 列的初值在不同水平之间复用）"""
    return busemann(f, ray, p, settings, **dict(options)).value


@dataclass(frozen=True)
class HorosphereVertex:
    x: float
    t: float
    level: float
    residual: float


def horosphere(
    f: ProfileFn,
    ray: CentralRay,
    level: float,
    xs: Sequence[float],
    settings: SolverSettings = DEFAULT_SOLVER,
    **busemann_options,
) -> List[HorosphereVertex]:
    """
    极限球面 b_γ = level 表示为 x 上的图 t(x)

    t 平移是等距，b(t + δ, x) = b(t, x) + f_max·δ，据此给出初值；
    残差超过 1e-6 时在初值附近用 brentq 求根（b 关于 t 严格递增）。
    """
    vertices = []
    t0 = ray.base[0]
    for x in xs:
        x = float(x)

        def b(t):
            return busemann_value(f, ray, (t, x), settings, tuple(sorted(busemann_options.items())))

        t_star = t0 + (level - b(t0)) / ray.f_max
        residual = b(t_star) - level
        if abs(residual) > VERTEX_TOL:
            delta = max(4.0 * abs(residual) / ray.f_max, 1e-6)
            lo, hi = t_star - delta, t_star + delta
            while b(lo) > level:
                lo -= delta
                delta *= 2.0
            while b(hi) < level:
                hi += delta
                delta *= 2.0
            t_star = brentq(lambda t: b(t) - level, lo, hi, xtol=1e-10)
            residual = b(t_star) - level
        vertices.append(HorosphereVertex(x=x, t=float(t_star), level=float(level), residual=float(residual)))
    return vertices


@dataclass
class HorosphereGap:
    """sup d(x, y)（x ∈ K(p), y ∈ K(q)）与 d(p, q) 的比较"""

    d_pq: float
    sampled_sup: float
    argmax: Tuple[Point, Point]
    allowance: float = 0.02
    upper_slack: float = 1e-6

    @property
    def lower(self) -> float:
        return self.d_pq * (1.0 - self.allowance)

    @property
    def upper(self) -> float:
        return self.d_pq + self.upper_slack

    @property
    def within_band(self) -> bool:
        return self.lower <= self.sampled_sup <= self.upper

    def to_dict(self) -> dict:
        return {
            "d_pq": self.d_pq,
            "sampled_sup": self.sampled_sup,
            "lower": self.lower,
            "upper": self.upper,
            "within_band": self.within_band,
            "argmax": [list(self.argmax[0]), list(self.argmax[1])],
        }


def horosphere_distance_check(
    f: ProfileFn,
    ray: CentralRay,
    s_p: float,
    s_q: float,
    samples: int = 64,
    x_halfwidth: float = 0.25,
    settings: SolverSettings = DEFAULT_SOLVER,
    **busemann_options,
) -> Tuple[HorosphereGap, List[HorosphereVertex], List[HorosphereVertex]]:
    """
    p = γ(s_p) ≪ q = γ(s_q)：比较两张极限球面之间的采样上确界与 d(p, q)

    Returns:
        (gap 报告, K(p) 顶点, K(q) 顶点)
    """
    if not s_p < s_q:
        raise ValueError("需要 s_p < s_q")
    p, q = ray.at(s_p), ray.at(s_q)
    d_pq = distance(f, p, q, settings, with_paths=False).value
    xs = np.linspace(ray.base[1] - x_halfwidth, ray.base[1] + x_halfwidth, samples)
    level_p = busemann(f, ray, p, settings, **busemann_options).value
    level_q = busemann(f, ray, q, settings, **busemann_options).value
    k_p = horosphere(f, ray, level_p, xs, settings, **busemann_options)
    k_q = horosphere(f, ray, level_q, xs, settings, **busemann_options)

    best, argmax = -1.0, (p, q)
    targets = [(v.t, v.x) for v in k_q]
    for vertex in k_p:
        a = (vertex.t, vertex.x)
        for target, result in zip(targets, distance_many(f, a, targets, settings)):
            if result.value > best:
                best, argmax = result.value, (a, target)
    return HorosphereGap(d_pq=d_pq, sampled_sup=best, argmax=argmax), k_p, k_q


def busemann_gap(
    f: ProfileFn,
    ray: CentralRay,
    p: Point,
    q: Point,
    settings: SolverSettings = DEFAULT_SOLVER,
    **busemann_options,
) -> float:
    """b(q) − b(p) − d(p, q)，对时序点对应 ≥ 0"""
    bp = busemann(f, ray, p, settings, **busemann_options).value
    bq = busemann(f, ray, q, settings, **busemann_options).value
    return bq - bp - distance(f, p, q, settings, with_paths=False).value
