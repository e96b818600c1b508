"""类时极点模块 - 极点证书、割函数与指数映射单射性探测"""
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from scipy.optimize import brentq, root
from scipy.spatial import cKDTree

from .causal import Point, distance_many, segment_crossings
from .config import SolverSettings
from .dynamics import DEFAULT_SOLVER, PhaseState, StoppingCondition, flow, flow_stack, focusing_times, jacobi_zeros
from .profile import ProfileFn

console = Console()

CERTIFIED = "certified"
REFUTED = "refuted"

# Jacobi 零点与差分扩散预言零点的比对容差（τ 单位）
ORACLE_MATCH_TOL = 1e-4


@dataclass(frozen=True)
class Refutation:
    """可复现的反例：初始角 ψ₀、参数 τ* 以及原因（jacobi 或 defect）"""

    psi0: float
    tau: float
    reason: str


@dataclass
class AngleEvidence:
    """单个初始角的证据"""

    psi0: float
    first_zero: Optional[float]
    oracle_zero: Optional[float]
    max_defect: float = float("nan")
    agrees: bool = True

    def to_dict(self) -> dict:
        return {
            "psi0": self.psi0,
            "first_jacobi_zero": self.first_zero,
            "oracle_zero": self.oracle_zero,
            "max_defect": self.max_defect,
            "agrees": self.agrees,
        }


@dataclass
class PoleCertificate:
    """有限时域、有限角度网格上的类时极点证书"""

    point: Point
    horizon: float
    n_angles: int
    angle_span: float
    evidence: List[AngleEvidence] = field(default_factory=list)
    refutation: Optional[Refutation] = None

    @property
    def status(self) -> str:
        return CERTIFIED if self.refutation is None else REFUTED

    @property
    def certified(self) -> bool:
        return self.refutation is None

    @property
    def max_defect(self) -> float:
        probed = [e.max_defect for e in self.evidence if not math.isnan(e.max_defect)]
        return max(probed) if probed else 0.0

    @property
    def oracle_agreement(self) -> bool:
        return all(e.agrees for e in self.evidence)

    @property
    def jacobi_zero_count(self) -> int:
        return sum(1 for e in self.evidence if e.first_zero is not None)

    def to_dict(self) -> dict:
        data = {
            "point": list(self.point),
            "horizon": self.horizon,
            "n_angles": self.n_angles,
            "angle_span": self.angle_span,
            "status": self.status,
            "jacobi_zero_count": self.jacobi_zero_count,
            "max_defect": self.max_defect,
            "oracle_agreement": self.oracle_agreement,
        }
        if self.refutation is not None:
            data["refutation"] = {
                "psi0": self.refutation.psi0,
                "tau": self.refutation.tau,
                "reason": self.refutation.reason,
            }
        return data


def _zeros_agree(zeros: List[float], oracle: List[float]) -> bool:
    if len(zeros) != len(oracle):
        return False
    return all(abs(a - b) <= ORACLE_MATCH_TOL for a, b in zip(zeros, oracle))


def distance_defects(
    f: ProfileFn,
    p: Point,
    psi0: float,
    taus: Sequence[float],
    settings: SolverSettings = DEFAULT_SOLVER,
) -> np.ndarray:
    """沿 γ_ψ₀ 的 |d(p, γ(τ)) − τ|"""
    return _defect_table(f, p, [psi0], taus, settings)[0]


def _defect_table(
    f: ProfileFn,
    p: Point,
    angles: Sequence[float],
    taus: Sequence[float],
    settings: SolverSettings,
) -> np.ndarray:
    """所有角度、所有探测时刻的距离缺陷，形状 (len(angles), len(taus))；一束 ψ₀ 扇形服务全部目标"""
    points = []
    for psi0 in angles:
        path = flow(f, PhaseState(p[0], p[1], float(psi0)), StoppingCondition.tau(max(taus)), settings)
        points.extend(path.state_at(tau).point for tau in taus)
    values = np.array([r.value for r in distance_many(f, p, points, settings)])
    return np.abs(values.reshape(len(angles), len(taus)) - np.asarray(taus, dtype=float))


def certify_pole(
    f: ProfileFn,
    p: Point,
    horizon: float = 100.0,
    n_angles: int = 64,
    settings: SolverSettings = DEFAULT_SOLVER,
    angle_span: float = 1.5,
    defect_tol: float = 1e-6,
) -> PoleCertificate:
    """
    在对称角度网格上检验 p 是否为类时极点

    每个角度都计算 Jacobi 零点并与差分扩散预言比对；
    同一网格上每个角度都在 τ = T/4, T/2, T 处比较 d(p, γ(τ)) 与 τ。

    Args:
        f: 剖面
        p: 待检验点
        horizon: 时域 T
        n_angles: 角度数（≥ 8）
        angle_span: ψ₀ ∈ [−angle_span, angle_span]
        defect_tol: 距离缺陷容差

    Returns:
        PoleCertificate，refuted 时携带 (ψ₀, τ*, reason)
    """
    if horizon <= 0:
        raise ValueError("horizon 必须为正")
    if n_angles < 8:
        raise ValueError("n_angles 至少为 8")
    p = (float(p[0]), float(p[1]))
    angles = np.linspace(-angle_span, angle_span, n_angles)
    cert = PoleCertificate(point=p, horizon=horizon, n_angles=n_angles, angle_span=angle_span)

    for psi0 in angles:
        s0 = PhaseState(p[0], p[1], float(psi0))
        zeros = jacobi_zeros(f, s0, horizon, settings)
        oracle = focusing_times(f, s0, horizon, settings=settings)
        cert.evidence.append(
            AngleEvidence(
                psi0=float(psi0),
                first_zero=zeros[0] if zeros else None,
                oracle_zero=oracle[0] if oracle else None,
                agrees=_zeros_agree(zeros, oracle),
            )
        )
        if zeros and cert.refutation is None:
            cert.refutation = Refutation(float(psi0), zeros[0], "jacobi")

    taus = [horizon / 4, horizon / 2, horizon]
    table = _defect_table(f, p, angles, taus, settings)
    for evidence, defects in zip(cert.evidence, table):
        evidence.max_defect = float(defects.max())
        bad = np.nonzero(defects > defect_tol)[0]
        if len(bad) and cert.refutation is None:
            cert.refutation = Refutation(evidence.psi0, taus[bad[0]], "defect")

    if not cert.oracle_agreement:
        console.print(f"[yellow]⚠ {p}: Jacobi 零点与差分扩散预言在部分角度上不一致[/yellow]")
    if cert.certified:
        console.print(f"[green]✓ {p} 在 T={horizon:g}、{n_angles} 个角度上通过极点检验[/green]")
    else:
        r = cert.refutation
        console.print(f"[yellow]✗ {p} 被否定: ψ₀={r.psi0:.6g}, τ*={r.tau:.6g} ({r.reason})[/yellow]")
    return cert


def cut_value(
    f: ProfileFn,
    p: Point,
    psi0: float,
    horizon: float,
    settings: SolverSettings = DEFAULT_SOLVER,
    probes: int = 16,
    defect_tol: float = 1e-6,
) -> float:
    """
    割函数 s(v) 的有限时域估计

    在 τ 网格上探测距离缺陷，一旦超出容差就在前一个探测点与该点之间二分；
    直到 horizon 都没有缺陷时返回 math.inf。
    """
    if horizon <= 0:
        raise ValueError("horizon 必须为正")
    p = (float(p[0]), float(p[1]))
    taus = np.linspace(horizon / probes, horizon, probes)
    defects = distance_defects(f, p, psi0, taus, settings)
    bad = np.nonzero(defects > defect_tol)[0]
    if not len(bad):
        return math.inf
    k = int(bad[0])
    lo = 0.0 if k == 0 else float(taus[k - 1])
    hi = float(taus[k])

    def excess(tau):
        if tau <= 0:
            return -defect_tol
        return float(distance_defects(f, p, psi0, [tau], settings)[0]) - defect_tol

    return float(brentq(excess, lo, hi, xtol=1e-6))


@dataclass(frozen=True)
class Collision:
    """两个不同网格单元 (ψ₀, τ) 的端点重合"""

    cell_a: Tuple[float, float]
    cell_b: Tuple[float, float]
    gap: float


@dataclass
class InjectivityReport:
    n_cells: int
    candidates: int
    collisions: List[Collision] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.collisions

    def to_dict(self) -> dict:
        return {
            "n_cells": self.n_cells,
            "candidates": self.candidates,
            "collisions": [
                {"cell_a": list(c.cell_a), "cell_b": list(c.cell_b), "gap": c.gap} for c in self.collisions
            ],
        }


def _endpoint(f: ProfileFn, p: Point, psi0: float, tau: float, settings: SolverSettings) -> np.ndarray:
    t, x, _ = flow_stack(f, [PhaseState(p[0], p[1], psi0)], tau, settings, taus=[tau])
    return np.array([t[0, 0], x[0, 0]])


def exp_injectivity_probe(
    f: ProfileFn,
    p: Point,
    angles: Sequence[float],
    taus: Sequence[float],
    settings: SolverSettings = DEFAULT_SOLVER,
    tol: float = 1e-6,
) -> InjectivityReport:
    """
    在 (ψ₀, τ) 网格上采样端点映射，报告不同单元端点重合的情况

    候选来自两处：网格端点间距已小于 tol 的单元对，以及等 τ 曲线（ψ₀ ↦ γ(τ)）之间或自身的折线交叉；
    折线交叉再用 scipy.optimize.root 局部精修。
    """
    p = (float(p[0]), float(p[1]))
    angles = np.asarray(angles, dtype=float)
    taus = np.sort(np.asarray(taus, dtype=float))
    if np.any(taus <= 0):
        raise ValueError("τ 网格必须为正")
    states = [PhaseState(p[0], p[1], float(a)) for a in angles]
    t, x, _ = flow_stack(f, states, float(taus[-1]), settings, taus=taus)
    report = InjectivityReport(n_cells=t.size, candidates=0)

    points = np.column_stack([t.ravel(), x.ravel()])
    n = len(angles)
    for a, b in sorted(cKDTree(points).query_pairs(r=tol)):
        report.candidates += 1
        gap = float(np.linalg.norm(points[a] - points[b]))
        report.collisions.append(
            Collision(
                (float(angles[a % n]), float(taus[a // n])),
                (float(angles[b % n]), float(taus[b // n])),
                gap,
            )
        )

    curves = [np.column_stack([t[k], x[k]]) for k in range(len(taus))]
    level_pairs = [(k, k) for k in range(len(taus))] + list(combinations(range(len(taus)), 2))
    for ka, kb in level_pairs:
        i, j, _ = segment_crossings(curves[ka], curves[kb])
        for ia, jb in zip(i, j):
            if ka == kb and abs(int(ia) - int(jb)) < 2:
                continue
            report.candidates += 1
            collision = _refine_crossing(f, p, angles, taus, ka, kb, int(ia), int(jb), settings, tol)
            if collision is not None:
                report.collisions.append(collision)

    if report.collisions:
        console.print(f"[yellow]⚠ {p}: 指数映射在网格上出现 {len(report.collisions)} 处端点重合[/yellow]")
    return report


def _refine_crossing(f, p, angles, taus, ka, kb, ia, jb, settings, tol) -> Optional[Collision]:
    tau_a, tau_b = float(taus[ka]), float(taus[kb])

    def mismatch(v):
        return _endpoint(f, p, v[0], tau_a, settings) - _endpoint(f, p, v[1], tau_b, settings)

    guess = [0.5 * (angles[ia] + angles[ia + 1]), 0.5 * (angles[jb] + angles[jb + 1])]
    sol = root(mismatch, guess, method="hybr", options={"xtol": 1e-12})
    if not sol.success:
        return None
    psi_a, psi_b = float(sol.x[0]), float(sol.x[1])
    gap = float(np.linalg.norm(mismatch(sol.x)))
    if gap > tol:
        return None
    if ka == kb and abs(psi_a - psi_b) <= tol:
        return None
    return Collision((psi_a, tau_a), (psi_b, tau_b), gap)
