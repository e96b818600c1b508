"""实验流程模块 - 七类实验与 selftest 用例，检查结果与产物写出"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console
from rich.markup import escape

from . import __version__
from .artifacts import ArtifactWriter
from .causal import (
    CAUSAL_BOUNDARY,
    CHRONOLOGICAL,
    Point,
    causal_relation,
    crossing_check,
    distance,
    distance_many,
    reflect,
    richardson_oracle,
)
from .config import ExperimentConfig
from .dynamics import (
    PhaseState,
    StoppingCondition,
    flow,
    null_flow,
    null_path_residual,
    rotation_numbers,
    time_reflect,
    unit_speed_defect,
)
from .errors import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    ConfigError,
    NoTimelikeClassError,
    Torus2PolesError,
)
from .figures import FigureGenerator
from .horocycle import CentralRay, busemann, busemann_value, horosphere, horosphere_distance_check
from .lattice import (
    HomologyClass,
    axis_direction,
    build_axis,
    closed_geodesic_through_pole,
    cone_test_by_rotation,
    deck_apply,
    displacement,
    displacement_map,
    in_time_cone_interior,
    parallel_check,
)
from .poles import certify_pole, cut_value, exp_injectivity_probe
from .profile import ProfileFn, profile_from_spec, volume_fraction_of_poles

console = Console()

CLAIRAUT_TOL = 1e-8
UNIT_SPEED_TOL = 1e-14
REVERSIBILITY_TOL = 1e-7
FLAT_TOL = 1e-7
BOUNDARY_TOL = 1e-8
ROTATION_TOL = 1e-6
NULL_PERIOD_TOL = 1e-8
ORACLE_TOL = 1e-3
ENDPOINT_TOL = 1e-9
CLOSURE_TOL = 1e-8
MAXIMALITY_TOL = 1e-5
EXCESS_TOL = 1e-6
ROW_TOL = 1e-9
PERIOD_TOL = 1e-4
JUNCTION_TOL = 1e-6
POWER_TOL = 1e-6
BUSEMANN_TOL = 1e-6
MONOTONE_TOL = 1e-8
TRIANGLE_TOL = 1e-7
DECK_TOL = 1e-9
SLOPE_TOL = 1e-6
BAND_RATIO = 1.001

SELFTEST_CASES = (
    "clairaut-conservation",
    "flat-distance",
    "class-a",
    "pole-certification",
    "closed-geodesics",
    "displacement-maximum",
    "axis-smoothness",
    "busemann",
    "horosphere-distance",
    "structural",
    "parallel-axes",
)

# 闭测地线的 20 类可解性测试
BATTERY = tuple(HomologyClass(kt, kx) for kt in range(1, 6) for kx in range(0, 4))


@dataclass
class CheckResult:
    """单项检查：数值、容差与是否通过"""

    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class ExperimentReport:
    """一次运行的汇总"""

    experiment: str
    checks: List[CheckResult] = field(default_factory=list)
    values: Dict[str, object] = field(default_factory=dict)
    error: Optional[str] = None
    exit_code: int = EXIT_OK

    @property
    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return self.error is None and not self.failed


def snap_to_max_locus(f: ProfileFn, x: float) -> float:
    """max_locus（按周期提升）中距 x 最近的点"""
    base = math.floor(x)
    y = x - base
    best = None
    for lo, hi in f.max_locus:
        for shift in (-1.0, 0.0, 1.0):
            c = min(max(y, lo + shift), hi + shift)
            if best is None or abs(c - y) < abs(best - y):
                best = c
    return base + best


def plateau_interval(f: ProfileFn) -> Tuple[float, float]:
    lo, hi = f.max_locus[0]
    return lo, hi


def sample_spacetime_pool(rng: np.random.Generator, size: int, t_span: float = 2.0) -> List[Tuple[float, float]]:
    """t ∈ [0, t_span)、x 在整个 [0, 1) 上均匀取点，按 t 排序"""
    return sorted((rng.uniform(0.0, t_span), rng.uniform(0.0, 1.0)) for _ in range(size))


class ExperimentRunner:
    """按配置运行一个实验，记录检查结果并写出 CSV / SVG / results.json"""

    def __init__(self, config: ExperimentConfig, output_dir: Path, threads: int = 1):
        """
        初始化实验

        Args:
            config: 已校验的实验配置
            output_dir: 产物目录
            threads: 网格扫描的进程数
        """
        self.config = config
        self.solver = config.solver
        self.threads = threads
        self.output_dir = Path(output_dir)
        p = config.profile
        self.profile = profile_from_spec(p.kind, c=p.c, a=p.a, b=p.b, epsilon=p.epsilon)
        self.rng = np.random.default_rng(config.experiment.seed)
        self.writer = ArtifactWriter(self.output_dir)
        self.figures = FigureGenerator(self.output_dir)
        self.report = ExperimentReport(experiment=config.experiment.name)
        self._maps = {}

    # ------------------------------------------------------------------
    # 记录与输出
    # ------------------------------------------------------------------

    def check(self, name: str, passed: bool, value: float, tolerance: float, detail: str = "") -> CheckResult:
        """记录一项检查（检查本身从不抛出异常）"""
        result = CheckResult(name, bool(passed), float(value), float(tolerance), detail)
        self.report.checks.append(result)
        mark = "[green][OK][/green]" if result.passed else "[red][FAIL][/red]"
        console.print(f"   {mark} {name}: {result.value:.3e} (容差 {result.tolerance:.1e}) {detail}")
        return result

    def _stage(self, i: int, n: int, title: str) -> None:
        console.print(f"\n[bold cyan]阶段 {i}/{n}: {title}[/bold cyan]")

    def _manifest(self) -> dict:
        report = self.report
        return {
            "version": __version__,
            "experiment": report.experiment,
            "config": self.config.model_dump(mode="json"),
            "profile": self.profile.to_dict(),
            "checks": [c.to_dict() for c in report.checks],
            "n_checks": len(report.checks),
            "n_failed": len(report.failed),
            "values": report.values,
            "artifacts": sorted(p.name for p in self.writer.written + self.figures.written),
            "status": "pass" if report.passed else ("error" if report.error else "fail"),
            "exit_code": report.exit_code,
            "error": report.error,
        }

    def run(self) -> ExperimentReport:
        """
        运行配置中指定的实验

        Returns:
            ExperimentReport；results.json 无论成败都会写出
        """
        name = self.config.experiment.name
        handler = getattr(self, "_run_" + name.replace("-", "_"))
        console.print(f"[bold]实验[/bold] {name}  剖面 {self.profile.label}  seed={self.config.experiment.seed}")
        try:
            handler()
            self.report.exit_code = EXIT_CHECK_FAILED if self.report.failed else EXIT_OK
        except Torus2PolesError as e:
            self.report.error = f"{type(e).__name__}: {e}"
            self.report.exit_code = e.exit_code
            console.print(f"[red]错误: {escape(str(e))}[/red]")
        finally:
            self.writer.write_results(self._manifest())
        return self.report

    # ------------------------------------------------------------------
    # classify
    # ------------------------------------------------------------------

    def _run_classify(self) -> None:
        f = self.profile
        self._stage(1, 3, "零曲线旋转数")
        rotation = self._check_rotation(f)
        self.writer.write_table(
            "rotation",
            [
                {"branch": "minus", "slope": rotation.m_minus, "oracle": rotation.oracle_minus,
                 "diff": abs(rotation.m_minus - rotation.oracle_minus)},
                {"branch": "plus", "slope": rotation.m_plus, "oracle": rotation.oracle_plus,
                 "diff": abs(rotation.m_plus - rotation.oracle_plus)},
            ],
        )

        self._stage(2, 3, "稳定时间锥")
        cones = {}
        agree = True
        for pair in self.config.lattice.classes:
            k = HomologyClass.of(pair)
            cone = in_time_cone_interior(f, k)
            by_rotation = cone_test_by_rotation(rotation, k)
            cones[str(k)] = {
                "interior": cone.interior,
                "indeterminate": cone.indeterminate,
                "margin": cone.margin,
                "by_rotation": by_rotation,
            }
            agree &= cone.indeterminate or cone.interior == by_rotation
        self.check("cone-agreement", agree, 0.0 if agree else 1.0, 0.0, "解析判定与零曲线位移判定一致")
        self.report.values["cone"] = cones
        self.report.values["pole_fraction"] = volume_fraction_of_poles(f)

        self._stage(3, 3, "零曲线图")
        horizon = 2.0 * f.null_period
        polylines = []
        for branch in ("plus", "minus"):
            path = null_flow(f, (0.0, 0.0), branch, StoppingCondition.time(horizon), self.solver)
            polylines.append(np.column_stack([path.t, path.x]))
        self.figures.geodesic_figure("classify_null", f, polylines, f"null curves X±, {f.label}")

    def _check_rotation(self, f: ProfileFn):
        rotation = rotation_numbers(f, self.solver)
        self.report.values["rotation"] = rotation.to_dict()
        self.check("class-a", rotation.is_class_a, rotation.m_plus - rotation.m_minus, 0.0, "m⁺ ≠ m⁻")
        self.check("rotation-oracle", rotation.cross_check <= ROTATION_TOL, rotation.cross_check, ROTATION_TOL)
        path = null_flow(f, (0.0, 0.0), "plus", StoppingCondition.x_at_least(1.0), self.solver)
        gap = abs(path.end[0] - f.null_period)
        self.check("null-period", gap <= NULL_PERIOD_TOL, gap, NULL_PERIOD_TOL, f"P = {f.null_period:.12g}")
        residual = null_path_residual(f, path)
        self.check("null-path-residual", residual <= 1e-10, residual, 1e-10)
        return rotation

    # ------------------------------------------------------------------
    # certify-pole
    # ------------------------------------------------------------------

    def _run_certify_pole(self) -> None:
        f, cfg = self.profile, self.config.pole
        p = cfg.point
        on_plateau = f.in_max_locus(p[1])

        self._stage(1, 3, f"Jacobi 零点与距离缺陷 ({cfg.n_angles} 个角度, T = {cfg.horizon:g})")
        cert = self._certify(f, p)
        self.writer.write_table("pole_evidence", [e.to_dict() for e in cert.evidence])

        self._stage(2, 3, "割函数")
        angles = [-cfg.probe_span, 0.0, cfg.probe_span]
        cuts = {}
        for psi0 in angles:
            cuts["%.6g" % psi0] = cut_value(
                f, p, psi0, cfg.horizon, self.solver, probes=cfg.cut_probes, defect_tol=cfg.defect_tol
            )
        self.report.values["cut_values"] = cuts
        if on_plateau:
            finite = sum(1 for v in cuts.values() if math.isfinite(v))
            self.check("cut-infinite", finite == 0, finite, 0.0, "极点出发的测地线在时域内无割点")

        self._stage(3, 3, "指数映射单射性")
        probe_angles = np.linspace(-cfg.angle_span, cfg.angle_span, min(cfg.n_angles, 32))
        taus = np.linspace(cfg.horizon / cfg.probe_times, cfg.horizon, cfg.probe_times)
        report = exp_injectivity_probe(f, p, probe_angles, taus, self.solver)
        self.report.values["injectivity"] = report.to_dict()
        if cert.certified:
            self.check("exp-injective", report.empty, len(report.collisions), 0.0)

        polylines = []
        for psi0 in np.linspace(-cfg.angle_span, cfg.angle_span, 9):
            path = flow(f, PhaseState(p[0], p[1], float(psi0)), StoppingCondition.tau(2.0), self.solver)
            polylines.append(path.polyline(200))
        self.figures.geodesic_figure("certify-pole_geodesics", f, polylines, f"geodesics from {p}, {f.label}")

    def _certify(self, f: ProfileFn, p: Point):
        cfg = self.config.pole
        if f.kind == "theorem_plateau":
            fraction = volume_fraction_of_poles(f)
            self.report.values["pole_fraction"] = fraction
            self.check("pole-volume", fraction >= 1.0 - f.epsilon, fraction, 1.0 - f.epsilon, "极点集体积比例 ≥ 1 − ε")
        cert = certify_pole(
            f,
            p,
            horizon=cfg.horizon,
            n_angles=cfg.n_angles,
            settings=self.solver,
            angle_span=cfg.angle_span,
            defect_tol=cfg.defect_tol,
        )
        self.report.values["certificate"] = cert.to_dict()
        self.check(
            "jacobi-oracle-agreement",
            cert.oracle_agreement,
            sum(1 for e in cert.evidence if not e.agrees),
            0.0,
            "Jacobi 零点与差分扩散预言一致",
        )
        if f.in_max_locus(p[1]):
            self.check("pole-jacobi-zeros", cert.jacobi_zero_count == 0, cert.jacobi_zero_count, 0.0)
            self.check("pole-distance-defect", cert.max_defect <= cfg.defect_tol, cert.max_defect, cfg.defect_tol)
            self.check("pole-certified", cert.certified, 0.0 if cert.certified else 1.0, 0.0, cert.status)
        return cert

    # ------------------------------------------------------------------
    # distance
    # ------------------------------------------------------------------

    def _run_distance(self) -> None:
        f, cfg = self.profile, self.config.distance
        rows, polylines, results = [], [], []
        self._stage(1, 2, f"打靶求距离 ({len(cfg.pairs)} 对)")
        for i, (p, q) in enumerate(cfg.pairs):
            result = distance(f, p, q, self.solver, with_paths=True)
            results.append(result.to_dict())
            rows.append(
                {
                    "t_p": p[0], "x_p": p[1], "t_q": q[0], "x_q": q[1],
                    "value": result.value, "relation": result.relation,
                    "n_maximizers": len(result.maximizers),
                }
            )
            console.print(f"   [cyan]d({p}, {q}) = {result.value:.12g}  ({result.relation})[/cyan]")
            if result.maximizers:
                worst = max(m.endpoint_residual for m in result.maximizers)
                self.check(f"maximizer-endpoint[{i}]", worst <= ENDPOINT_TOL, worst, ENDPOINT_TOL)
                polylines.extend(m.path.polyline(400) for m in result.maximizers)
            if len(result.maximizers) > 1:
                counts = [
                    crossing_check(a.path, b.path)
                    for k, a in enumerate(result.maximizers)
                    for b in result.maximizers[k + 1 :]
                ]
                self.check(f"maximizer-crossings[{i}]", max(counts) <= 1, max(counts), 1.0)
            if f.kind == "constant":
                exact = _flat_distance(f.c, p, q)
                self.check(f"flat-oracle[{i}]", abs(result.value - exact) <= FLAT_TOL, abs(result.value - exact), FLAT_TOL)

        self._stage(2, 2, "格点动态规划预言")
        oracles = []
        for i, (p, q) in enumerate(cfg.pairs):
            if causal_relation(f, p, q, self.solver.causal_tol) != CHRONOLOGICAL:
                oracles.append(None)
                continue
            oracle = richardson_oracle(f, p, q, cfg.oracle_resolution)
            oracles.append(oracle.to_dict())
            gap = abs(rows[i]["value"] - oracle.value)
            self.check(f"distance-oracle[{i}]", gap <= ORACLE_TOL, gap, ORACLE_TOL, f"预言误差估计 {oracle.error:.2e}")
        self.report.values["distances"] = results
        self.report.values["oracles"] = oracles
        self.writer.write_table("distance", rows)
        if polylines:
            self.figures.geodesic_figure("distance_maximizers", f, polylines, f"maximizers, {f.label}")

    # ------------------------------------------------------------------
    # closed-geodesics
    # ------------------------------------------------------------------

    def _run_closed_geodesics(self) -> None:
        f = self.profile
        self._stage(1, 1, "过极点的闭类时测地线")
        rows, polylines = self._closed_geodesics(f)
        self.writer.write_table("closed-geodesics", rows)
        if polylines:
            self.figures.geodesic_figure("closed-geodesics", f, polylines, f"closed geodesics, {f.label}")

    def _closed_geodesics(self, f: ProfileFn):
        base = self.config.pole.point
        rows, polylines = [], []
        for pair in self.config.lattice.classes:
            k = HomologyClass.of(pair)
            cone = in_time_cone_interior(f, k)
            if not cone:
                self.check(f"cone-interior{k}", False, cone.margin, 0.0, "同调类不在稳定时间锥内部")
                continue
            result = closed_geodesic_through_pole(f, base, k, self.solver)
            rows.append(result.to_dict())
            polylines.append(result.path.polyline(400))
            console.print(f"   [cyan]{k}: ψ₀ = {result.psi0:.12g}, L = {result.period_length:.12g}[/cyan]")
            self.check(f"closure{k}", result.position_residual <= CLOSURE_TOL, result.position_residual, CLOSURE_TOL)
            self.check(f"angle-closure{k}", result.angle_residual <= CLOSURE_TOL, result.angle_residual, CLOSURE_TOL)
            self.check(f"maximality{k}", result.maximality_gap <= MAXIMALITY_TOL, result.maximality_gap, MAXIMALITY_TOL)
        return rows, polylines

    # ------------------------------------------------------------------
    # displacement-map
    # ------------------------------------------------------------------

    def _run_displacement_map(self) -> None:
        f, cfg = self.profile, self.config.lattice
        n = len(cfg.map_classes)
        axes_rows = []
        for i, pair in enumerate(cfg.map_classes, 1):
            k = HomologyClass.of(pair)
            self._stage(i, n, f"位移函数 k = {k} ({cfg.grid_t}×{cfg.grid_x})")
            field_ = self._displacement_checks(f, k)
            self.writer.write_table(f"displacement-map_k{k.k_t}_{k.k_x}", field_.records())
            self.figures.displacement_heatmap(
                f"displacement-map_k{k.k_t}_{k.k_x}", f, field_, f"d(q, T_k q), k = {k}, {f.label}"
            )
            axis = self._axis_checks(f, k)
            axes_rows.extend(
                {
                    "k_t": k.k_t, "k_x": k.k_x, "m": m, "length": m * axis.period_length,
                    "gap": gap, "max_junction": axis.max_junction,
                }
                for m, gap in sorted(axis.period_gaps.items())
            )
        self.writer.write_table("axes", axes_rows)

    def _displacement_field(self, f: ProfileFn, k: HomologyClass):
        if k not in self._maps:
            cfg = self.config.lattice
            self._maps[k] = displacement_map(
                f, k, cfg.grid_t, cfg.grid_x, self.solver, threads=self.threads, rows=cfg.solved_rows
            )
        return self._maps[k]

    def _plateau_argmax(self, f: ProfileFn, field_) -> Point:
        i, j = field_.argmax_cells[0]
        return (float(field_.t_centers[i]), snap_to_max_locus(f, float(field_.x_centers[j])))

    def _displacement_checks(self, f: ProfileFn, k: HomologyClass):
        base = self.config.pole.point
        field_ = self._displacement_field(f, k)
        pole_value = displacement(f, k, base, self.solver)
        excess = field_.max_value - pole_value
        self.report.values[f"displacement{k}"] = {
            "max": field_.max_value,
            "pole_value": pole_value,
            "argmax_columns": field_.argmax_columns,
            "row_spread": field_.row_spread,
            "solved_rows": field_.solved_rows,
        }
        self.check(f"argmax-on-plateau{k}", field_.argmax_on_plateau(f), len(field_.argmax_columns), 0.0)
        self.check(f"pole-maximum{k}", excess <= EXCESS_TOL, excess, EXCESS_TOL, f"极点处 {pole_value:.12g}")
        self.check(f"row-invariance{k}", field_.row_spread <= ROW_TOL, field_.row_spread, ROW_TOL)
        if f.kind == "constant":
            spread = float(field_.values.max() - field_.values.min())
            self.check(f"flat-field{k}", spread <= ROW_TOL, spread, ROW_TOL)
        return field_

    def _axis_checks(self, f: ProfileFn, k: HomologyClass):
        field_ = self._displacement_field(f, k)
        q = self._plateau_argmax(f, field_)
        axis = build_axis(f, k, q, m=self.config.lattice.axis_periods, settings=self.solver)
        self.report.values[f"axis{k}"] = axis.to_dict()
        period_gap = abs(axis.period_length - field_.max_value)
        multi = max(axis.period_gaps.values(), default=0.0)
        self.check(f"axis-period{k}", period_gap <= PERIOD_TOL, period_gap, PERIOD_TOL, "周期长度 = 网格上确界")
        self.check(f"axis-junctions{k}", axis.max_junction <= JUNCTION_TOL, axis.max_junction, JUNCTION_TOL)
        self.check(f"axis-power{k}", axis.power_consistency <= POWER_TOL, axis.power_consistency, POWER_TOL)
        self.check(f"axis-multi-period{k}", multi <= MAXIMALITY_TOL, multi, MAXIMALITY_TOL)
        self.figures.geodesic_figure(
            f"axis_k{k.k_t}_{k.k_x}", f, [axis.polyline()], f"axis of T_k, k = {k}, from {q}"
        )
        return axis

    # ------------------------------------------------------------------
    # busemann
    # ------------------------------------------------------------------

    def _central_ray(self, f: ProfileFn) -> CentralRay:
        base = self.config.busemann.base
        if not f.in_max_locus(base[1]):
            raise ConfigError([f"busemann.base: x = {base[1]} 不在 {f.label} 的最大值集合上"])
        return CentralRay.through(f, base)

    def _busemann_options(self) -> dict:
        cfg = self.config.busemann
        return {"s_start": cfg.s_start, "s_max": cfg.s_max, "tol": cfg.tol, "extrapolate": cfg.extrapolate}

    def _run_busemann(self) -> None:
        f, cfg = self.profile, self.config.busemann
        ray = self._central_ray(f)
        opts = self._busemann_options()

        self._stage(1, 3, "射线上的 Busemann 值")
        for s in cfg.levels:
            value = busemann(f, ray, ray.at(s), self.solver, **opts).value
            self.check(f"on-ray[{s:g}]", abs(value - s) <= BUSEMANN_TOL, abs(value - s), BUSEMANN_TOL)
        probe = (ray.base[0], ray.base[1] + 0.2)
        result = busemann(f, ray, probe, self.solver, **opts)
        self.report.values["busemann_probe"] = {"point": list(probe), **result.to_dict()}
        self.check("busemann-converged", result.converged, result.last_step, cfg.tol)

        self._stage(2, 3, f"极限球面 ({cfg.samples} 个顶点)")
        levels = sorted(cfg.levels)
        horospheres = {}
        rows = []
        if len(levels) >= 2:
            gap, k_p, k_q = horosphere_distance_check(
                f, ray, levels[0], levels[1], cfg.samples, cfg.x_halfwidth, self.solver, **opts
            )
            self.report.values["horosphere_gap"] = gap.to_dict()
            self.check(
                "horosphere-distance",
                gap.within_band,
                gap.sampled_sup - gap.d_pq,
                gap.d_pq * gap.allowance,
                f"[{gap.lower:.9g}, {gap.upper:.9g}] ∋ {gap.sampled_sup:.9g}",
            )
            horospheres[levels[0]], horospheres[levels[1]] = k_p, k_q
        xs = np.linspace(ray.base[1] - cfg.x_halfwidth, ray.base[1] + cfg.x_halfwidth, cfg.samples)
        for s in levels:
            if s not in horospheres:
                level = busemann_value(f, ray, ray.at(s), self.solver, tuple(sorted(opts.items())))
                horospheres[s] = horosphere(f, ray, level, xs, self.solver, **opts)

        self._stage(3, 3, "输出")
        worst = 0.0
        for s in levels:
            for v in horospheres[s]:
                rows.append({"x": v.x, "t": v.t, "level": v.level, "residual": v.residual})
                worst = max(worst, abs(v.residual))
        self.check("vertex-residual", worst <= BUSEMANN_TOL, worst, BUSEMANN_TOL)
        self.writer.write_table("busemann", rows)
        self.figures.horosphere_figure("busemann_horospheres", ray, horospheres, f"horospheres, {f.label}")

    # ------------------------------------------------------------------
    # selftest
    # ------------------------------------------------------------------

    def _run_selftest(self) -> None:
        requested = self.config.selftest.case_list
        cases = list(SELFTEST_CASES) if requested is None else requested
        unknown = [c for c in cases if c not in SELFTEST_CASES]
        if unknown:
            raise ConfigError([f"selftest.cases: 未知用例 {', '.join(unknown)}"])
        errors = []
        for i, case in enumerate(cases, 1):
            self._stage(i, len(cases), case)
            try:
                getattr(self, "_case_" + case.replace("-", "_"))()
            except Torus2PolesError as e:
                errors.append(e)
                console.print(f"   [red]{case}: {escape(str(e))}[/red]")
                self.check(f"{case}-error", False, 1.0, 0.0, f"{type(e).__name__}: {e}")
        if errors:
            raise errors[0]

    def _case_clairaut_conservation(self) -> None:
        cfg = self.config.selftest
        f = ProfileFn.cosine(1.5, 0.4)
        measuring = self.solver.model_copy(update={"drift_bound": math.inf})
        drift = speed = 0.0
        monotone = True
        for _ in range(cfg.clairaut_samples):
            s0 = PhaseState(self.rng.uniform(0, 1), self.rng.uniform(0, 1), self.rng.uniform(-1, 1))
            path = flow(f, s0, StoppingCondition.tau(cfg.clairaut_horizon), measuring)
            drift = max(drift, path.drift)
            monotone &= bool(np.all(np.diff(path.t) > 0))
            for s in path.samples[:: max(1, len(path.tau) // 50)]:
                speed = max(speed, unit_speed_defect(f, s) / math.cosh(s.psi) ** 2)
        self.check("clairaut-drift", drift <= CLAIRAUT_TOL, drift, CLAIRAUT_TOL, f"{cfg.clairaut_samples} 条, τ ≤ {cfg.clairaut_horizon:g}")
        self.check("unit-speed", speed <= UNIT_SPEED_TOL, speed, UNIT_SPEED_TOL)
        self.check("time-monotone", monotone, 0.0 if monotone else 1.0, 0.0)

        worst = 0.0
        for _ in range(5):
            s0 = PhaseState(self.rng.uniform(0, 1), self.rng.uniform(0, 1), self.rng.uniform(-1, 1))
            forward = flow(f, s0, StoppingCondition.tau(20.0), measuring)
            back = flow(f, time_reflect(forward.end), StoppingCondition.tau(20.0), measuring).end
            restored = time_reflect(back)
            worst = max(worst, abs(restored.t - s0.t), abs(restored.x - s0.x), abs(restored.psi - s0.psi))
        self.check("reversibility", worst <= REVERSIBILITY_TOL, worst, REVERSIBILITY_TOL)

    def _case_flat_distance(self) -> None:
        cfg = self.config.selftest
        f = ProfileFn.constant(1.0)
        per_source = 10
        worst_chrono = worst_boundary = worst_unrelated = 0.0
        remaining = cfg.flat_pairs
        while remaining > 0:
            p = (self.rng.uniform(-1, 1), self.rng.uniform(-1, 1))
            targets = []
            for _ in range(min(per_source, remaining)):
                dt = self.rng.uniform(0.05, 3.0)
                kind = self.rng.random()
                if kind < 0.8:
                    dx = self.rng.uniform(-0.99, 0.99) * dt
                elif kind < 0.9:
                    dx = self.rng.choice([-1.0, 1.0]) * self.rng.uniform(1.01, 2.0) * dt
                else:
                    dt, dx = -dt, self.rng.uniform(-1.0, 1.0)
                targets.append((p[0] + dt, p[1] + dx))
            remaining -= len(targets)
            boundary = (p[0] + 1.0, p[1] + 1.0)
            for q, result in zip(targets + [boundary], distance_many(f, p, targets + [boundary], self.solver)):
                if result.relation == CHRONOLOGICAL:
                    worst_chrono = max(worst_chrono, abs(result.value - _flat_distance(1.0, p, q)))
                elif result.relation == CAUSAL_BOUNDARY:
                    worst_boundary = max(worst_boundary, result.value)
                else:
                    worst_unrelated = max(worst_unrelated, result.value)
        self.check("flat-oracle", worst_chrono <= FLAT_TOL, worst_chrono, FLAT_TOL, f"{cfg.flat_pairs} 对")
        self.check("flat-unrelated-zero", worst_unrelated == 0.0, worst_unrelated, 0.0)
        self.check("flat-boundary-zero", worst_boundary <= BOUNDARY_TOL, worst_boundary, BOUNDARY_TOL)

    def _case_class_a(self) -> None:
        self._check_rotation(self.profile)

    def _case_pole_certification(self) -> None:
        self._certify(self.profile, self.config.pole.point)

    def _case_closed_geodesics(self) -> None:
        f = self.profile
        self._closed_geodesics(f)
        base = self.config.pole.point
        mismatches = []
        for k in BATTERY:
            cone = in_time_cone_interior(f, k)
            if cone.indeterminate:
                continue
            try:
                closed_geodesic_through_pole(f, base, k, self.solver, check_cone=False, check_maximality=False)
                solved = True
            except NoTimelikeClassError:
                solved = False
            if solved != cone.interior:
                mismatches.append(str(k))
        self.check(
            "cone-solvability",
            not mismatches,
            len(mismatches),
            0.0,
            f"{len(BATTERY)} 类" + (f"，不一致: {', '.join(mismatches)}" if mismatches else ""),
        )

    def _case_displacement_maximum(self) -> None:
        for pair in self.config.lattice.map_classes:
            self._displacement_checks(self.profile, HomologyClass.of(pair))

    def _case_axis_smoothness(self) -> None:
        for pair in self.config.lattice.map_classes:
            self._axis_checks(self.profile, HomologyClass.of(pair))

    def _case_busemann(self) -> None:
        cfg = self.config.selftest
        opts = self._busemann_options()

        c = self.config.profile.c
        flat = ProfileFn.constant(c)
        flat_ray = CentralRay.through(flat, (0.0, 0.0))
        worst = 0.0
        for _ in range(cfg.busemann_points):
            p = (self.rng.uniform(-1.0, 1.0), self.rng.uniform(-0.5, 0.5))
            worst = max(worst, abs(busemann(flat, flat_ray, p, self.solver, **opts).value - c * p[0]))
        self.check("busemann-flat", worst <= BUSEMANN_TOL, worst, BUSEMANN_TOL, f"b = {c:g}·t, {cfg.busemann_points} 点")

        f = self.profile
        ray = self._central_ray(f)
        probe = (ray.base[0], ray.base[1] + 0.2)
        result = busemann(f, ray, probe, self.solver, **opts)
        rises = np.diff([h for _, h in result.trace])
        rise = float(rises.max()) if len(rises) else 0.0
        self.check("busemann-monotone", rise <= MONOTONE_TOL, rise, MONOTONE_TOL)
        self.check("busemann-converged", result.converged, result.last_step, opts["tol"])

        pool = sample_spacetime_pool(self.rng, max(2, cfg.busemann_pairs // 5))
        key = tuple(sorted(opts.items()))
        values = [busemann_value(f, ray, p, self.solver, key) for p in pool]
        pairs = [
            (i, j)
            for i in range(len(pool))
            for j in range(len(pool))
            if causal_relation(f, pool[i], pool[j], self.solver.causal_tol) == CHRONOLOGICAL
        ]
        if len(pairs) > cfg.busemann_pairs:
            picks = self.rng.choice(len(pairs), size=cfg.busemann_pairs, replace=False)
            pairs = sorted(pairs[k] for k in picks)
        violation = math.inf
        for i in sorted({i for i, _ in pairs}):
            js = [j for a, j in pairs if a == i]
            for j, d in zip(js, distance_many(f, pool[i], [pool[j] for j in js], self.solver)):
                violation = min(violation, values[j] - values[i] - d.value)
        if not math.isfinite(violation):
            violation = 0.0
        self.check("busemann-gap", violation >= -BUSEMANN_TOL, violation, BUSEMANN_TOL, f"{len(pairs)} 对时序点")

    def _case_horosphere_distance(self) -> None:
        f, cfg = self.profile, self.config.busemann
        ray = self._central_ray(f)
        gap, k_p, _ = horosphere_distance_check(
            f, ray, 1.0, 4.0, cfg.samples, cfg.x_halfwidth, self.solver, **self._busemann_options()
        )
        self.report.values["horosphere_gap"] = gap.to_dict()
        self.check("ray-distance", abs(gap.d_pq - 3.0) <= BUSEMANN_TOL, abs(gap.d_pq - 3.0), BUSEMANN_TOL, "d(γ(1), γ(4)) = 3")
        self.check(
            "horosphere-distance",
            gap.within_band,
            gap.sampled_sup - gap.d_pq,
            gap.d_pq * gap.allowance,
            f"[{gap.lower:.9g}, {gap.upper:.9g}] ∋ {gap.sampled_sup:.9g}",
        )

    def _chronological_offset(self, f: ProfileFn) -> Tuple[float, float]:
        dt = self.rng.uniform(0.2, 1.5)
        return dt, self.rng.uniform(-0.9, 0.9) * f.f_min * dt

    def _case_structural(self) -> None:
        f, cfg = self.profile, self.config.selftest

        margin = math.inf
        for _ in range(cfg.triples):
            p = (self.rng.uniform(0, 1), self.rng.uniform(0, 1))
            a, b = self._chronological_offset(f), self._chronological_offset(f)
            q = (p[0] + a[0], p[1] + a[1])
            r = (q[0] + b[0], q[1] + b[1])
            d_pq, d_pr = distance_many(f, p, [q, r], self.solver)
            d_qr = distance(f, q, r, self.solver, with_paths=False)
            margin = min(margin, d_pr.value - d_pq.value - d_qr.value)
        self.check("reverse-triangle", margin >= -TRIANGLE_TOL, margin, TRIANGLE_TOL, f"{cfg.triples} 组")

        worst_count = 0
        for _ in range(cfg.crossing_pairs):
            p1 = (self.rng.uniform(0, 1), self.rng.uniform(0, 1))
            a = self._chronological_offset(f)
            q1 = (p1[0] + 2.0 * a[0], p1[1] + 2.0 * a[1])
            p2 = (p1[0] + self.rng.uniform(-0.2, 0.2), p1[1] + self.rng.uniform(-0.3, 0.3))
            q2 = (q1[0] + self.rng.uniform(-0.2, 0.2), q1[1] + self.rng.uniform(-0.3, 0.3))
            if causal_relation(f, p2, q2, self.solver.causal_tol) != CHRONOLOGICAL:
                continue
            m1 = distance(f, p1, q1, self.solver).maximizers[0]
            m2 = distance(f, p2, q2, self.solver).maximizers[0]
            worst_count = max(worst_count, crossing_check(m1.path, m2.path))
        self.check("maximizer-crossings", worst_count <= 1, worst_count, 1.0, f"{cfg.crossing_pairs} 对")

        deck = duality = 0.0
        for _ in range(cfg.deck_cases):
            p = (self.rng.uniform(0, 1), self.rng.uniform(0, 1))
            a = self._chronological_offset(f)
            q = (p[0] + a[0], p[1] + a[1])
            k = HomologyClass(int(self.rng.integers(-3, 4)), int(self.rng.integers(-3, 4)))
            d = distance(f, p, q, self.solver, with_paths=False).value
            moved = distance(f, deck_apply(k, p), deck_apply(k, q), self.solver, with_paths=False).value
            mirrored = distance(f, reflect(q), reflect(p), self.solver, with_paths=False).value
            deck = max(deck, abs(d - moved))
            duality = max(duality, abs(d - mirrored))
        self.check("deck-invariance", deck <= DECK_TOL, deck, DECK_TOL, f"{cfg.deck_cases} 例")
        self.check("time-reflection", duality <= DECK_TOL, duality, DECK_TOL)

    def _case_parallel_axes(self) -> None:
        f = self.profile
        k = HomologyClass(3, 1)
        lo, hi = plateau_interval(f)
        width = hi - lo
        a = (0.0, lo + 0.3 * width)
        b = (0.25, lo + 0.7 * width)
        axis_a = build_axis(f, k, a, m=3, settings=self.solver, max_check=1)
        axis_b = build_axis(f, k, b, m=3, settings=self.solver, max_check=1)
        report = parallel_check(axis_a, axis_b, SLOPE_TOL, BAND_RATIO)
        self.report.values["parallel_axes"] = {
            "a": list(a),
            "b": list(b),
            "direction": axis_direction(axis_a),
            **report.to_dict(),
        }
        self.check("axis-slopes", report.slope_diff <= SLOPE_TOL, report.slope_diff, SLOPE_TOL)
        self.check("axis-band", report.ratio <= BAND_RATIO, report.ratio, BAND_RATIO)


def _flat_distance(c: float, p: Point, q: Point) -> float:
    dt, dx = q[0] - p[0], q[1] - p[1]
    return math.sqrt(max(c * c * dt * dt - dx * dx, 0.0))


def run_experiment(config: ExperimentConfig, output_dir: Path, threads: int = 1) -> ExperimentReport:
    """运行实验并返回报告"""
    return ExperimentRunner(config, output_dir, threads).run()
