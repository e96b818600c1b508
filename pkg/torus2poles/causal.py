"""因果结构模块 - 因果关系判定、Lorentz 距离打靶求解与格点动态规划预言"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from rich.console import Console
from scipy.optimize import brentq, minimize

from .config import SolverSettings
from .dynamics import DEFAULT_SOLVER, GeodesicPath, PhaseState, StoppingCondition, flow, flow_fan, shoot
from .errors import SolverInconsistencyError
from .profile import ProfileFn

console = Console()

Point = Tuple[float, float]

CHRONOLOGICAL = "chronological"
CAUSAL_BOUNDARY = "causal-boundary"
UNRELATED = "unrelated"

# 扫描范围扩大次数上限（±Ψ 每次翻倍）
_MAX_WIDENING = 40


@dataclass
class Maximizer:
    """一条连接 p、q 的测地线：初始双曲角、固有时长度与（可选）路径"""

    psi0: float
    length: float
    path: Optional[GeodesicPath] = None
    endpoint_residual: float = float("nan")

    def attach(self, path: GeodesicPath, q: Point) -> None:
        self.path = path
        self.endpoint_residual = max(abs(path.end.t - q[0]), abs(path.end.x - q[1]))


@dataclass
class DistanceResult:
    """d(p, q) 及全部达到最大值（在并列容差内）的测地线"""

    value: float
    relation: str
    maximizers: List[Maximizer] = field(default_factory=list)
    roots: List[Tuple[float, float]] = field(default_factory=list)
    refinements: int = 0
    converged: bool = True

    @property
    def psi0s(self) -> List[float]:
        return [m.psi0 for m in self.maximizers]

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "relation": self.relation,
            "maximizers": [{"psi0": m.psi0, "length": m.length} for m in self.maximizers],
            "n_roots": len(self.roots),
            "refinements": self.refinements,
            "converged": self.converged,
        }


def reflect(point: Point) -> Point:
    """时间反射 (t, x) ↦ (-t, x)；d(p, q) = d(reflect(q), reflect(p))"""
    return (-point[0], point[1])


def causal_relation(f: ProfileFn, p: Point, q: Point, tol: float = DEFAULT_SOLVER.causal_tol) -> str:
    """
    判定 q 相对 p 的因果关系

    q ∈ J⁺(p) 当且仅当 t_q − t_p ≥ ∫ dx/f（在 x_p、x_q 之间）。

    Returns:
        chronological / causal-boundary / unrelated
    """
    if tuple(p) == tuple(q):
        return CAUSAL_BOUNDARY
    dt = q[0] - p[0]
    if dt <= 0:
        return UNRELATED
    gap = dt - abs(f.inverse_integral(p[1], q[1]))
    if abs(gap) <= tol:
        return CAUSAL_BOUNDARY
    return CHRONOLOGICAL if gap > 0 else UNRELATED


def scan_range(f: ProfileFn, p: Point, q: Point) -> float:
    """
    ψ₀ 扫描半宽 Ψ

    r = |Δx| / (f_min·Δt) < 1 时用 Clairaut 界：C > f_max / √(1 − r²) 的测地线关于 x 单调且越过 x_q；
    否则退回 asinh(|Δx|·f_max/Δt) + 2。
    """
    dt = q[0] - p[0]
    dx = abs(q[1] - p[1])
    r = dx / (f.f_min * dt)
    if r < 1.0:
        c_star = f.f_max / math.sqrt(1.0 - r * r)
        bound = math.acosh(max(1.0, c_star / f.value(p[1])))
        return 1.05 * bound + 1e-3 / max(1.0, dt)
    return math.asinh(dx * f.f_max / dt) + 2.0


@dataclass
class _Search:
    q: Point
    cache: Dict[float, float] = field(default_factory=dict)
    roots: List[Tuple[float, float]] = field(default_factory=list)
    history: List[Tuple[int, float]] = field(default_factory=list)
    converged: bool = False


def _bracketing_fan(f: ProfileFn, p: Point, pending: List[_Search], psi_max: float, n: int, settings: SolverSettings):
    t_ends = [s.q[0] for s in pending]
    x_targets = np.array([s.q[1] for s in pending])[:, None]
    for _ in range(_MAX_WIDENING):
        nodes = np.linspace(-psi_max, psi_max, n)
        xs, _, taus = flow_fan(f, p, nodes, t_ends, settings)
        miss = xs - x_targets
        if np.all(miss[:, 0] < 0) and np.all(miss[:, -1] > 0):
            return nodes, miss, taus, psi_max
        psi_max *= 2.0
        console.print(f"[yellow]扫描边界未包住目标，ψ₀ 范围扩大至 ±{psi_max:.4g}[/yellow]")
    raise SolverInconsistencyError(f"ψ₀ 扫描范围扩大 {_MAX_WIDENING} 次后仍未包住目标")


def _refine_root(f: ProfileFn, p: Point, q: Point, a: float, b: float, settings: SolverSettings):
    last = {}

    def miss(psi0):
        x, _, tau = shoot(f, p, psi0, q[0], settings)
        last[psi0] = tau
        return x - q[1]

    psi0 = brentq(miss, a, b, xtol=settings.root_tol, maxiter=200)
    tau = last[psi0] if psi0 in last else shoot(f, p, psi0, q[0], settings)[2]
    return float(psi0), float(tau)


def _roots_on_grid(f: ProfileFn, p: Point, search: _Search, nodes, miss, taus, settings: SolverSettings):
    roots = [(float(nodes[k]), float(taus[k])) for k in np.nonzero(miss == 0.0)[0]]
    for k in np.nonzero(miss[:-1] * miss[1:] < 0)[0]:
        a, b = nodes[k], nodes[k + 1]
        known = [psi for psi in search.cache if a < psi < b]
        if len(known) == 1:
            psi0 = known[0]
        else:
            psi0, tau = _refine_root(f, p, search.q, a, b, settings)
            search.cache[psi0] = tau
        roots.append((psi0, search.cache[psi0]))
    roots.sort()
    return roots


def _shoot_targets(f: ProfileFn, p: Point, targets: Sequence[Point], settings: SolverSettings) -> List[_Search]:
    searches = [_Search(tuple(q)) for q in targets]
    pending = list(searches)
    psi_max = max(scan_range(f, p, s.q) for s in searches)
    n = settings.scan_nodes
    for _ in range(settings.max_refinements):
        nodes, miss, taus, psi_max = _bracketing_fan(f, p, pending, psi_max, n, settings)
        remaining = []
        for row, search in enumerate(pending):
            search.roots = _roots_on_grid(f, p, search, nodes, miss[row], taus[row], settings)
            if not search.roots:
                raise SolverInconsistencyError(f"时序点对 {p} → {search.q} 未找到连接测地线")
            search.history.append((len(search.roots), max(tau for _, tau in search.roots)))
            if len(search.history) >= 2:
                (count0, best0), (count1, best1) = search.history[-2:]
                if count0 == count1 and abs(best1 - best0) <= settings.tie_tol:
                    search.converged = True
                    continue
            remaining.append(search)
        pending = remaining
        if not pending:
            break
        n *= 2
    for search in pending:
        console.print(f"[yellow]⚠ {p} → {search.q}: {settings.max_refinements} 次加密后根数仍未稳定[/yellow]")
    return searches


def _result_from_search(
    f: ProfileFn, p: Point, search: _Search, settings: SolverSettings, with_paths: bool
) -> DistanceResult:
    value = max(tau for _, tau in search.roots)
    maximizers = []
    for psi0, tau in search.roots:
        if tau < value - settings.tie_tol:
            continue
        m = Maximizer(psi0, tau)
        if with_paths:
            path = flow(f, PhaseState(p[0], p[1], psi0), StoppingCondition.time(search.q[0]), settings)
            m.attach(path, search.q)
        maximizers.append(m)
    return DistanceResult(
        value=value,
        relation=CHRONOLOGICAL,
        maximizers=maximizers,
        roots=search.roots,
        refinements=len(search.history),
        converged=search.converged,
    )


def distance_many(
    f: ProfileFn,
    p: Point,
    targets: Sequence[Point],
    settings: SolverSettings = DEFAULT_SOLVER,
    with_paths: bool = False,
) -> List[DistanceResult]:
    """
    从同一点 p 到多个目标点的 Lorentz 距离（共享同一束打靶测地线）

    Args:
        f: 剖面
        p: 起点（万有覆盖中的显式提升）
        targets: 目标点列表
        with_paths: 是否为每条最大测地线生成 GeodesicPath

    Returns:
        与 targets 顺序一致的 DistanceResult 列表
    """
    p = (float(p[0]), float(p[1]))
    results: List[Optional[DistanceResult]] = [None] * len(targets)
    chronological = []
    for i, q in enumerate(targets):
        relation = causal_relation(f, p, q, settings.causal_tol)
        if relation == CHRONOLOGICAL:
            chronological.append(i)
        else:
            results[i] = DistanceResult(0.0, relation)
    if chronological:
        searches = _shoot_targets(f, p, [targets[i] for i in chronological], settings)
        for i, search in zip(chronological, searches):
            results[i] = _result_from_search(f, p, search, settings, with_paths)
    return results


def distance(
    f: ProfileFn,
    p: Point,
    q: Point,
    settings: SolverSettings = DEFAULT_SOLVER,
    with_paths: bool = True,
) -> DistanceResult:
    """Lorentz 距离 d(p, q)：非时序点对返回 0，否则返回最长连接测地线的固有时"""
    return distance_many(f, p, [q], settings, with_paths)[0]


def distance_point_set(
    f: ProfileFn, p: Point, points: Sequence[Point], settings: SolverSettings = DEFAULT_SOLVER
) -> Tuple[float, Point]:
    """d(p, S) = sup_{q∈S} d(p, q)，并列时取输入顺序中的第一个"""
    if not points:
        raise ValueError("点集不能为空")
    results = distance_many(f, p, points, settings)
    values = [r.value for r in results]
    best = max(values)
    for q, value in zip(points, values):
        if value >= best - settings.tie_tol:
            return best, tuple(q)
    return best, tuple(points[0])


def _orient(u, v, w):
    return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])


def segment_crossings(a: np.ndarray, b: np.ndarray):
    """
    折线 a、b 之间的真交叉（严格方向判定，共线与端点接触不计）

    Returns:
        (i, j, hits)：a 的第 i 段与 b 的第 j 段相交，hits 为交点坐标
    """
    a1, a2 = a[:-1, None, :], a[1:, None, :]
    b1, b2 = b[None, :-1, :], b[None, 1:, :]
    d1 = _orient(b1, b2, a1)
    d2 = _orient(b1, b2, a2)
    d3 = _orient(a1, a2, b1)
    d4 = _orient(a1, a2, b2)
    i, j = np.nonzero((d1 * d2 < 0) & (d3 * d4 < 0))
    s = d1[i, j] / (d1[i, j] - d2[i, j])
    hits = a[i] + s[:, None] * (a[i + 1] - a[i])
    return i, j, hits


def crossing_check(seg1: GeodesicPath, seg2: GeodesicPath, n: int = 400, endpoint_tol: float = 1e-6) -> int:
    """
    两条测地线段折线的横截交叉次数（端点重合不计）

    Args:
        seg1, seg2: 测地线段
        n: 每条折线按 τ 均匀重采样的点数
        endpoint_tol: 与任一端点距离小于此值的交点视为端点重合

    Returns:
        交叉次数，最大测地线之间应 ≤ 1
    """
    a = seg1.polyline(n)
    b = seg2.polyline(n)
    _, _, hits = segment_crossings(a, b)
    if not len(hits):
        return 0
    ends = np.array([a[0], a[-1], b[0], b[-1]])
    gap = np.min(np.linalg.norm(hits[:, None, :] - ends[None, :, :], axis=2), axis=1)
    return int(np.count_nonzero(gap > endpoint_tol))


# ---------------------------------------------------------------------------
# 格点动态规划预言（与打靶法完全独立）
# ---------------------------------------------------------------------------

_GAUSS_S, _GAUSS_W = leggauss(3)
_GAUSS_S = 0.5 * (_GAUSS_S + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W

# L-BFGS-B 线搜索碰到非类时折线时的目标罚值
_INFEASIBLE = 1e6


@dataclass(frozen=True)
class OracleResult:
    """Richardson 外推后的格点预言值及其误差估计"""

    value: float
    error: float
    levels: Tuple[float, ...]
    resolutions: Tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "levels": list(self.levels),
            "resolutions": list(self.resolutions),
        }


def _segment_length(f: ProfileFn, a, b, ht: float):
    """直线段 x(t) 从 a 到 b（时长 ht）的 Lorentz 弧长，类空时为 -inf"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    v2 = ((b - a) / ht) ** 2
    total = np.zeros(np.broadcast(a, b).shape)
    timelike = np.ones(total.shape, dtype=bool)
    for s, w in zip(_GAUSS_S, _GAUSS_W):
        arg = f.value(a + s * (b - a)) ** 2 - v2
        timelike &= arg > 0
        total = total + w * np.sqrt(np.maximum(arg, 0.0))
    return np.where(timelike, ht * total, -np.inf)


def _lattice_dp(f: ProfileFn, p: Point, q: Point, layers: int, x_ratio: int, margin: float):
    dt = q[0] - p[0]
    ht = dt / layers
    hx = ht / x_ratio
    lo = min(p[1], q[1]) - margin
    hi = max(p[1], q[1]) + margin
    j_lo = int(math.floor((lo - p[1]) / hx))
    j_hi = int(math.ceil((hi - p[1]) / hx))
    grid = p[1] + hx * np.arange(j_lo, j_hi + 1)
    start = -j_lo
    reach = int(math.ceil(f.f_max * ht / hx))

    steps = {o: _segment_length(f, grid, grid + o * hx, ht) for o in range(-reach, reach + 1)}
    value = np.full(len(grid), -np.inf)
    value[start] = 0.0
    parents = []
    for _ in range(layers - 1):
        best = np.full(len(grid), -np.inf)
        arg = np.zeros(len(grid), dtype=int)
        for o, seg in steps.items():
            cand = np.full(len(grid), -np.inf)
            if o >= 0:
                cand[o:] = value[: len(grid) - o] + seg[: len(grid) - o]
            else:
                cand[:o] = value[-o:] + seg[-o:]
            better = cand > best
            best[better] = cand[better]
            arg[better] = o
        parents.append(arg)
        value = best
    final = value + _segment_length(f, grid, np.full(len(grid), q[1]), ht)
    j = int(np.argmax(final))
    total = float(final[j])
    if not np.isfinite(total):
        raise SolverInconsistencyError(f"格点预言在 {p} → {q} 上找不到类时格点路径")
    path = [j]
    for arg in reversed(parents):
        j = j - arg[j]
        path.append(j)
    xs = np.concatenate([grid[path[::-1]], [q[1]]])
    return total, xs


def _polyline_length(f: ProfileFn, xs: np.ndarray, ht: float) -> float:
    """折线总弧长，任一段非类时则为 -inf"""
    return float(np.sum(_segment_length(f, xs[:-1], xs[1:], ht)))


def _polish(f: ProfileFn, p: Point, q: Point, xs: np.ndarray):
    """
    固定端点，对折线内部顶点做连续最大化（解析梯度 + L-BFGS-B）

    xs 必须是类时折线。线搜索试探到非类时折线时返回罚值；
    结果取所有类时迭代点中弧长最大者，罚值不会作为弧长返回。
    """
    layers = len(xs) - 1
    ht = (q[0] - p[0]) / layers
    best = {"value": _polyline_length(f, xs, ht), "inner": np.array(xs[1:-1], dtype=float)}

    def objective(inner):
        x = np.concatenate([[p[1]], inner, [q[1]]])
        a, b = x[:-1], x[1:]
        v = (b - a) / ht
        total = 0.0
        grad_a = np.zeros(layers)
        grad_b = np.zeros(layers)
        for s, w in zip(_GAUSS_S, _GAUSS_W):
            u = a + s * (b - a)
            fu, f1, _ = f.eval(u)
            arg = fu**2 - v**2
            if np.any(arg <= 0):
                return _INFEASIBLE, np.zeros_like(inner)
            root = np.sqrt(arg)
            total += ht * w * root.sum()
            grad_a += ht * w * (fu * f1 * (1.0 - s) + v / ht) / root
            grad_b += ht * w * (fu * f1 * s - v / ht) / root
        if total > best["value"]:
            best["value"] = total
            best["inner"] = np.array(inner, dtype=float)
        grad = grad_a[1:] + grad_b[:-1]
        return -total, -grad

    minimize(
        objective,
        best["inner"],
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12},
    )
    return float(best["value"]), np.concatenate([[p[1]], best["inner"], [q[1]]])


def grid_path_oracle(
    f: ProfileFn,
    p: Point,
    q: Point,
    resolution: int = 32,
    x_ratio: int = 8,
    margin: float = 1.0,
    start: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    在时空格点上用动态规划最大化类时折线的 Lorentz 弧长，再对顶点做连续精修

    Args:
        f: 剖面
        p, q: 端点（q 必须在 p 的时序未来中）
        resolution: 每单位 t 的层数
        x_ratio: 层间距与 x 格距之比
        start: 给定时跳过动态规划，直接从该折线（顶点 x 坐标）开始精修

    Returns:
        (弧长, 折线顶点 x 坐标)
    """
    dt = q[0] - p[0]
    if dt <= 0:
        raise ValueError("格点预言要求 t_q > t_p")
    layers = max(2, int(math.ceil(resolution * dt)))
    xs = None
    if start is not None:
        old = np.linspace(0.0, 1.0, len(start))
        xs = np.interp(np.linspace(0.0, 1.0, layers + 1), old, start)
        # 插值后的新求积点可能落在类空段上，此时退回动态规划
        if not np.isfinite(_polyline_length(f, xs, dt / layers)):
            xs = None
    if xs is None:
        _, xs = _lattice_dp(f, p, q, layers, x_ratio, margin)
    return _polish(f, p, q, xs)


def richardson_oracle(f: ProfileFn, p: Point, q: Point, resolution: int = 32) -> OracleResult:
    """分辨率 n、2n、4n 的格点预言，按二阶误差做 Richardson 外推"""
    if causal_relation(f, p, q) != CHRONOLOGICAL:
        return OracleResult(0.0, 0.0, (0.0, 0.0, 0.0), (resolution, 2 * resolution, 4 * resolution))
    resolutions = (resolution, 2 * resolution, 4 * resolution)
    levels = []
    xs = None
    for n in resolutions:
        value, xs = grid_path_oracle(f, p, q, n, start=xs)
        levels.append(value)
    coarse = (4.0 * levels[1] - levels[0]) / 3.0
    fine = (4.0 * levels[2] - levels[1]) / 3.0
    return OracleResult(fine, abs(fine - coarse), tuple(levels), resolutions)
