"""格点平移模块 - 甲板变换、稳定时间锥、位移函数、过极点的闭类时测地线与轴"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from scipy.optimize import brentq

from .causal import Point, distance, distance_many
from .config import SolverSettings
from .dynamics import (
    DEFAULT_SOLVER,
    GeodesicPath,
    PhaseState,
    RotationNumbers,
    StoppingCondition,
    flow,
)
from .errors import NoTimelikeClassError, StopUnreachableError
from .profile import ProfileFn

console = Console()

# 时间锥边界附近的不确定带
CONE_TOL = 1e-9

# 打靶角度向上扩张的上限（ψ ≳ 19 时 tanh ψ 在双精度下等于 1，与零方向不可区分）
_PSI_CAP = 20.0


@dataclass(frozen=True, order=True)
class HomologyClass:
    """整数同调类 k = (k_t, k_x)，对应甲板平移 T_k"""

    k_t: int
    k_x: int

    @classmethod
    def of(cls, pair: Sequence[int]) -> "HomologyClass":
        return cls(int(pair[0]), int(pair[1]))

    @property
    def is_zero(self) -> bool:
        return self.k_t == 0 and self.k_x == 0

    def scaled(self, m: int) -> "HomologyClass":
        return HomologyClass(m * self.k_t, m * self.k_x)

    def __str__(self) -> str:
        return f"({self.k_t},{self.k_x})"


def deck_apply(k: HomologyClass, p: Point) -> Point:
    """T_k(t, x) = (t + k_t, x + k_x)"""
    return (p[0] + k.k_t, p[1] + k.k_x)


@dataclass(frozen=True)
class ConeTest:
    """稳定时间锥内部判定：真值即 interior；margin = k_t − |k_x|·P"""

    interior: bool
    indeterminate: bool
    margin: float

    def __bool__(self) -> bool:
        return self.interior


def in_time_cone_interior(f: ProfileFn, k: HomologyClass) -> ConeTest:
    """k 的方向是否严格落在 (m⁻, m⁺) 之间（并且未来定向）"""
    if k.is_zero:
        raise ValueError("k = (0, 0) 不是平移")
    margin = k.k_t - abs(k.k_x) * f.null_period
    return ConeTest(interior=k.k_t > 0 and margin > 0, indeterminate=abs(margin) < CONE_TOL, margin=margin)


def cone_test_by_rotation(rotation: RotationNumbers, k: HomologyClass) -> bool:
    """用零曲线长时间位移得到的斜率判定，作为 in_time_cone_interior 的独立对照"""
    if k.k_t <= 0:
        return False
    slope = k.k_x / k.k_t
    return rotation.oracle_minus < slope < rotation.oracle_plus


def displacement(
    f: ProfileFn, k: HomologyClass, q: Point, settings: SolverSettings = DEFAULT_SOLVER
) -> float:
    """d(q, T_k q)"""
    return distance(f, q, deck_apply(k, q), settings, with_paths=False).value


def _displacement_cell(args) -> float:
    f, k, q, settings = args
    return displacement(f, k, q, settings)


@dataclass
class DisplacementMap:
    """[0,1)² 网格（单元中心）上的位移函数"""

    k: HomologyClass
    t_centers: np.ndarray
    x_centers: np.ndarray
    values: np.ndarray
    solved_rows: List[int]
    argmax_tol: float = 1e-8

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def argmax_cells(self) -> List[Tuple[int, int]]:
        """与最大值相差不超过 argmax_tol 的单元（按字典序）"""
        i, j = np.nonzero(self.values >= self.max_value - self.argmax_tol)
        return sorted(zip(i.tolist(), j.tolist()))

    @property
    def argmax_columns(self) -> List[int]:
        return sorted({j for _, j in self.argmax_cells})

    @property
    def row_spread(self) -> float:
        """已计算的各行之间同一列的最大差（度量关于 t 平移不变，应为 0）"""
        rows = self.values[self.solved_rows]
        return float(np.max(rows.max(axis=0) - rows.min(axis=0)))

    @property
    def cell_width(self) -> float:
        return 1.0 / len(self.x_centers)

    def argmax_on_plateau(self, f: ProfileFn) -> bool:
        """每个 argmax 单元的 x 范围（放宽一个单元宽度）都与 max_locus 相交"""
        h = self.cell_width
        for j in self.argmax_columns:
            lo = self.x_centers[j] - 1.5 * h
            hi = self.x_centers[j] + 1.5 * h
            if not any(_overlaps(lo, hi, a, b) for a, b in f.max_locus):
                return False
        return True

    def records(self) -> List[dict]:
        """逐单元记录；solved 为 False 的行是第 0 行的副本"""
        solved = set(self.solved_rows)
        return [
            {"cell_t": i, "cell_x": j, "value": float(self.values[i, j]), "solved": i in solved}
            for i in range(len(self.t_centers))
            for j in range(len(self.x_centers))
        ]


def _overlaps(lo: float, hi: float, a: float, b: float) -> bool:
    return any(lo <= b + s and a + s <= hi for s in (-1.0, 0.0, 1.0))


def displacement_map(
    f: ProfileFn,
    k: HomologyClass,
    n_t: int = 64,
    n_x: int = 64,
    settings: SolverSettings = DEFAULT_SOLVER,
    threads: int = 1,
    rows: Optional[int] = None,
) -> DisplacementMap:
    """
    在 n_t × n_x 网格上计算 d(q, T_k q)

    缺省逐行求解；rows 给定时只求解均匀分布的 rows 行（含第 0 行），其余行复制第 0 行，
    已求解各行之间的差由 row_spread 报告。threads > 1 时用进程池并行，结果顺序固定。
    """
    t_centers = (np.arange(n_t) + 0.5) / n_t
    x_centers = (np.arange(n_x) + 0.5) / n_x
    if rows is None or rows >= n_t:
        solved = list(range(n_t))
    else:
        solved = sorted({int(round(v)) for v in np.linspace(0, n_t - 1, max(1, rows))})
    cells = [(i, j) for i in solved for j in range(n_x)]
    jobs = [(f, k, (float(t_centers[i]), float(x_centers[j])), settings) for i, j in cells]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_displacement_cell, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_displacement_cell(job) for job in jobs]

    values = np.empty((n_t, n_x))
    for (i, j), value in zip(cells, results):
        values[i, j] = value
    for i in range(n_t):
        if i not in solved:
            values[i] = values[solved[0]]
    return DisplacementMap(k, t_centers, x_centers, values, solved)


@dataclass
class ClosedGeodesicResult:
    """经过极点 p̄、属于同调类 k 的闭类时测地线（一个周期）"""

    k: HomologyClass
    base: Point
    psi0: float
    period_length: float
    position_residual: float
    angle_residual: float
    maximality_gap: float
    path: GeodesicPath = field(repr=False)

    @property
    def closure_residual(self) -> float:
        return max(self.position_residual, self.angle_residual)

    def to_dict(self) -> dict:
        return {
            "k_t": self.k.k_t,
            "k_x": self.k.k_x,
            "psi0": self.psi0,
            "length": self.period_length,
            "closure_residual": self.closure_residual,
            "angle_residual": self.angle_residual,
            "maximality_gap": self.maximality_gap,
        }


def _closure_advance(f: ProfileFn, base: Point, k: HomologyClass, settings: SolverSettings):
    """ψ₀ ↦ x 前进 k_x 所需的 Δt；τ 预算内不可达时为 +∞（此时必有 Δt > k_t）"""
    sign = 1.0 if k.k_x > 0 else -1.0
    target = base[1] + k.k_x
    stop = StoppingCondition.x_at_least(target) if sign > 0 else StoppingCondition.x_at_most(target)
    budget = settings.model_copy(update={"tau_budget": 2.0 * f.f_max * k.k_t + 10.0})

    def advance(psi: float) -> float:
        try:
            path = flow(f, PhaseState(base[0], base[1], sign * psi), stop, budget)
        except StopUnreachableError:
            return math.inf
        return path.end.t - base[0]

    return advance


def _closure_bracket(advance, k_t: int) -> Tuple[float, float]:
    psi = 1.0
    if advance(psi) > k_t:
        while advance(psi) > k_t:
            psi *= 2.0
            if psi > _PSI_CAP:
                raise NoTimelikeClassError(f"ψ₀ 扩张到 {_PSI_CAP} 仍无法满足 Δt = {k_t}")
        return psi / 2.0, psi
    while advance(psi) <= k_t:
        psi /= 2.0
        if psi < 1e-12:
            raise NoTimelikeClassError(f"ψ₀ 收缩到 {psi:.1e} 仍有 Δt ≤ {k_t}")
    return psi, psi * 2.0


def closed_geodesic_through_pole(
    f: ProfileFn,
    base: Point,
    k: HomologyClass,
    settings: SolverSettings = DEFAULT_SOLVER,
    check_cone: bool = True,
    check_maximality: bool = True,
) -> ClosedGeodesicResult:
    """
    求经过 p̄ 的 k 类闭类时测地线

    k_x = 0 时为竖直测地线；否则对严格单调的 ψ₀ ↦ Δt(ψ₀) 求根 Δt = k_t。
    角度闭合 |ψ(τ₁) − ψ₀| 不参与求根，只作为结果报告。

    Raises:
        NoTimelikeClassError: k 不在稳定时间锥内部
    """
    base = (float(base[0]), float(base[1]))
    if check_cone and not in_time_cone_interior(f, k):
        raise NoTimelikeClassError(f"同调类 {k} 不在稳定时间锥内部（P = {f.null_period:.10g}）")
    if not f.in_max_locus(base[1]):
        console.print(f"[yellow]⚠ x = {base[1]} 不在 f 的最大值集合上[/yellow]")

    if k.k_x == 0:
        if k.k_t <= 0:
            raise NoTimelikeClassError(f"同调类 {k} 不是未来定向的")
        psi0 = 0.0
        path = flow(f, PhaseState(base[0], base[1], 0.0), StoppingCondition.time(base[0] + k.k_t), settings)
    else:
        advance = _closure_advance(f, base, k, settings)
        lo, hi = _closure_bracket(advance, k.k_t)
        magnitude = brentq(
            lambda psi: min(advance(psi), 1e6 * k.k_t) - k.k_t, lo, hi, xtol=settings.root_tol, maxiter=300
        )
        psi0 = math.copysign(magnitude, k.k_x)
        target = base[1] + k.k_x
        stop = StoppingCondition.x_at_least(target) if k.k_x > 0 else StoppingCondition.x_at_most(target)
        path = flow(f, PhaseState(base[0], base[1], psi0), stop, settings)

    end = path.end
    closing = deck_apply(k, base)
    result = ClosedGeodesicResult(
        k=k,
        base=base,
        psi0=psi0,
        period_length=path.length,
        position_residual=max(abs(end.t - closing[0]), abs(end.x - closing[1])),
        angle_residual=abs(end.psi - psi0),
        maximality_gap=float("nan"),
        path=path,
    )
    if check_maximality:
        result.maximality_gap = abs(path.length - distance(f, base, closing, settings, with_paths=False).value)
    return result


@dataclass
class Axis:
    """沿 T_k 拼接 m 个周期的最大测地线段"""

    k: HomologyClass
    base: Point
    psi0: float
    period_length: float
    segments: List[GeodesicPath] = field(repr=False)
    junction_mismatches: List[float] = field(default_factory=list)
    period_gaps: Dict[int, float] = field(default_factory=dict)
    power_gaps: Dict[int, float] = field(default_factory=dict)

    @property
    def periods(self) -> int:
        return len(self.segments)

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)

    @property
    def max_junction(self) -> float:
        return max(self.junction_mismatches, default=0.0)

    @property
    def power_consistency(self) -> float:
        """max_m |d(q, T_k^m q) − m·d(q, T_k q)|"""
        return max(self.power_gaps.values(), default=0.0)

    def polyline(self, n_per_period: int = 200) -> np.ndarray:
        parts = [s.polyline(n_per_period) for s in self.segments]
        return np.vstack([parts[0]] + [p[1:] for p in parts[1:]])

    def to_dict(self) -> dict:
        return {
            "k_t": self.k.k_t,
            "k_x": self.k.k_x,
            "base": list(self.base),
            "m": self.periods,
            "psi0": self.psi0,
            "period_length": self.period_length,
            "length": self.length,
            "max_junction": self.max_junction,
            "period_gaps": {str(m): gap for m, gap in self.period_gaps.items()},
            "power_consistency": self.power_consistency,
        }


def build_axis(
    f: ProfileFn,
    k: HomologyClass,
    q: Point,
    m: int = 4,
    settings: SolverSettings = DEFAULT_SOLVER,
    max_check: int = 4,
) -> Axis:
    """
    用 q 到 T_k q 的最大测地线及其甲板平移拼出 m 个周期的轴

    Returns:
        Axis：每个接点的双曲角跳变、多周期最大性差 |L(m) − d(q, T_k^m q)|（m ≤ max_check）
    """
    q = (float(q[0]), float(q[1]))
    one = distance(f, q, deck_apply(k, q), settings, with_paths=True)
    if not one.maximizers:
        raise NoTimelikeClassError(f"{q} 与 T_k{q} 之间不存在时序联系（k = {k}）")
    maximizer = one.maximizers[0]
    base_path = maximizer.path
    segments = [base_path.translated(i * k.k_t, i * k.k_x, i * base_path.length) for i in range(m)]
    junctions = [abs(a.end.psi - b.start.psi) for a, b in zip(segments[:-1], segments[1:])]

    checks = list(range(1, min(m, max_check) + 1))
    targets = [deck_apply(k.scaled(mm), q) for mm in checks]
    values = [r.value for r in distance_many(f, q, targets, settings)]
    period_gaps = {mm: abs(mm * base_path.length - v) for mm, v in zip(checks, values)}
    power_gaps = {mm: abs(v - mm * values[0]) for mm, v in zip(checks, values)}

    if max(junctions, default=0.0) > 1e-6:
        console.print(f"[yellow]⚠ 轴 {k} 在 {q} 处的接点角度跳变 {max(junctions):.3e}[/yellow]")
    return Axis(
        k=k,
        base=q,
        psi0=maximizer.psi0,
        period_length=base_path.length,
        segments=segments,
        junction_mismatches=junctions,
        period_gaps=period_gaps,
        power_gaps=power_gaps,
    )


def axis_direction(axis) -> float:
    """(t_i, x_i) 的最小二乘斜率 dx/dt；axis 可为 Axis、GeodesicPath 或 (n, 2) 数组"""
    points = axis.polyline() if hasattr(axis, "polyline") else np.asarray(axis)
    slope, _ = np.polyfit(points[:, 0], points[:, 1], 1)
    return float(slope)


@dataclass(frozen=True)
class ParallelReport:
    slope_a: float
    slope_b: float
    min_separation: float
    max_separation: float
    parallel: bool

    @property
    def slope_diff(self) -> float:
        return abs(self.slope_a - self.slope_b)

    @property
    def ratio(self) -> float:
        if self.min_separation <= 0:
            return math.inf
        return self.max_separation / self.min_separation

    def to_dict(self) -> dict:
        return {
            "slope_a": self.slope_a,
            "slope_b": self.slope_b,
            "slope_diff": self.slope_diff,
            "min_separation": self.min_separation,
            "max_separation": self.max_separation,
            "ratio": self.ratio,
            "parallel": self.parallel,
        }


def _graph(points: np.ndarray, axis: int):
    order = np.argsort(points[:, axis])
    return points[order, axis], points[order, 1 - axis]


def parallel_check(
    a: Axis, b: Axis, slope_tol: float = 1e-6, band_ratio: float = 1.001, samples: int = 400
) -> ParallelReport:
    """
    两条同类轴的平行性：斜率之差与分离带

    k_x ≠ 0 时比较相同 x 处的 t 偏移（两轴互为 t 平移）；竖直轴比较相同 t 处的 x 偏移。
    """
    pa, pb = a.polyline(), b.polyline()
    axis = 0 if a.k.k_x == 0 else 1
    ua, va = _graph(pa, axis)
    ub, vb = _graph(pb, axis)
    lo, hi = max(ua[0], ub[0]), min(ua[-1], ub[-1])
    grid = np.linspace(lo, hi, samples)
    gap = np.abs(np.interp(grid, ua, va) - np.interp(grid, ub, vb))
    slope_a, slope_b = axis_direction(pa), axis_direction(pb)
    report = ParallelReport(slope_a, slope_b, float(gap.min()), float(gap.max()), False)
    parallel = report.slope_diff <= slope_tol and report.ratio <= band_ratio
    return ParallelReport(slope_a, slope_b, report.min_separation, report.max_separation, parallel)
