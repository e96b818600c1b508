"""SVG 图形生成模块 - 测地线、位移热图与极限球面"""
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from jinja2 import Environment
from rich.console import Console

from . import __version__
from .templates import DISPLACEMENT_HEATMAP, GEODESIC_FIGURE, HOROSPHERE_FIGURE

console = Console()

_ENV = Environment(autoescape=False, keep_trailing_newline=True)

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")

# 热图色标（低 → 高）
_HEAT = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], dtype=float)


def _fmt(v: float) -> str:
    return "%.3f" % v


def _points(xs: Sequence[float], ys: Sequence[float]) -> str:
    return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))


def _heat_color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    pos = np.linspace(0.0, 1.0, len(_HEAT))
    rgb = [int(round(np.interp(u, pos, _HEAT[:, c]))) for c in range(3)]
    return "#%02x%02x%02x" % tuple(rgb)


def wrap_polyline(points: np.ndarray) -> List[np.ndarray]:
    """把万有覆盖中的 (t, x) 折线约化到 [0,1)²，在跨越边界处断开"""
    reduced = np.mod(points, 1.0)
    jumps = np.nonzero(np.any(np.abs(np.diff(reduced, axis=0)) > 0.5, axis=1))[0]
    pieces = np.split(reduced, jumps + 1)
    return [piece for piece in pieces if len(piece) >= 2]


class FigureGenerator:
    """SVG 图形生成器"""

    def __init__(self, output_dir: Path, size: int = 400):
        """
        初始化生成器

        Args:
            output_dir: 输出目录
            size: 基本域边长（像素）
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.size = size
        self.left = 40
        self.top = 30
        self.written: List[Path] = []

    def _write(self, name: str, template: str, **context) -> Path:
        text = _ENV.from_string(template).render(version=__version__, **context)
        path = self.output_dir / f"{name}.svg"
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        console.print(f"   [green][OK][/green] {path.name}")
        return path

    def _plateau_bands(self, f) -> List[dict]:
        bands = []
        for lo, hi in f.max_locus:
            if hi - lo >= 1.0:
                continue
            width = max(hi - lo, 0.004)
            bands.append({"x": _fmt(self.left + lo * self.size), "w": _fmt(width * self.size)})
        return bands

    def geodesic_figure(self, name: str, f, polylines: Sequence[np.ndarray], title: str) -> Path:
        """
        基本域上的测地线（t 向上）及底部的 f 剖面条带

        Args:
            name: 文件名（不含扩展名）
            f: 剖面
            polylines: 每条为 (n, 2) 的 (t, x) 数组
            title: 图题
        """
        size, left, top = self.size, self.left, self.top
        paths = []
        for k, line in enumerate(polylines):
            for piece in wrap_polyline(np.asarray(line)):
                xs = left + piece[:, 1] * size
                ys = top + (1.0 - piece[:, 0]) * size
                paths.append({"points": _points(xs, ys), "color": PALETTE[k % len(PALETTE)]})

        strip = 60
        strip_top = top + size + 16
        grid = np.linspace(0.0, 1.0, 201)
        values = np.asarray(f.value(grid), dtype=float)
        span = f.f_max - f.f_min
        levels = np.full_like(values, 0.5) if span <= 0 else (values - f.f_min) / span
        profile = _points(left + grid * size, strip_top + strip - 6 - levels * (strip - 12))
        return self._write(
            name,
            GEODESIC_FIGURE,
            title=title,
            width=left + size + 20,
            height=strip_top + strip + 26,
            left=left,
            top=top,
            size=size,
            strip=strip,
            strip_top=strip_top,
            plateau=self._plateau_bands(f),
            paths=paths,
            profile=profile,
        )

    def displacement_heatmap(self, name: str, f, field, title: str) -> Path:
        """位移函数热图，虚线框标出 f 的最大值平台"""
        size, left, top = self.size, self.left, self.top
        values = field.values
        n_t, n_x = values.shape
        vmin, vmax = float(values.min()), float(values.max())
        span = vmax - vmin
        w, h = size / n_x, size / n_t
        cells = []
        for i in range(n_t):
            for j in range(n_x):
                u = 0.5 if span <= 0 else (values[i, j] - vmin) / span
                cells.append(
                    {
                        "x": _fmt(left + j * w),
                        "y": _fmt(top + (n_t - 1 - i) * h),
                        "w": _fmt(w),
                        "h": _fmt(h),
                        "color": _heat_color(u),
                    }
                )
        return self._write(
            name,
            DISPLACEMENT_HEATMAP,
            title=title,
            width=left + size + 20,
            height=top + size + 30,
            left=left,
            top=top,
            size=size,
            cells=cells,
            plateau=self._plateau_bands(f),
            vmin="%.6g" % vmin,
            vmax="%.6g" % vmax,
        )

    def horosphere_figure(self, name: str, ray, horospheres: Dict[float, Sequence], title: str) -> Path:
        """
        极限球面折线与中心射线

        Args:
            ray: CentralRay
            horospheres: level → HorosphereVertex 列表
        """
        size, left, top = self.size, self.left, self.top
        xs = [v.x for vs in horospheres.values() for v in vs] + [ray.base[1]]
        ts = [v.t for vs in horospheres.values() for v in vs] + [ray.base[0]]
        x_lo, x_hi = min(xs), max(xs)
        t_lo, t_hi = min(ts), max(ts)
        pad_x = 0.05 * max(x_hi - x_lo, 1e-6)
        pad_t = 0.1 * max(t_hi - t_lo, 1e-6)
        x_lo, x_hi, t_lo, t_hi = x_lo - pad_x, x_hi + pad_x, t_lo - pad_t, t_hi + pad_t

        def sx(x):
            return left + (np.asarray(x) - x_lo) / (x_hi - x_lo) * size

        def sy(t):
            return top + (1.0 - (np.asarray(t) - t_lo) / (t_hi - t_lo)) * size

        levels = []
        for k, (level, vertices) in enumerate(sorted(horospheres.items())):
            vx = [v.x for v in vertices]
            vt = [v.t for v in vertices]
            levels.append(
                {
                    "points": _points(sx(vx), sy(vt)),
                    "color": PALETTE[k % len(PALETTE)],
                    "level": "%.6g" % level,
                    "label_x": _fmt(float(sx(vx[-1])) - 40),
                    "label_y": _fmt(float(sy(vt[-1])) - 4),
                }
            )
        ray_line = {"x": _fmt(float(sx(ray.base[1]))), "y1": _fmt(float(sy(ray.base[0]))), "y2": _fmt(top)}
        return self._write(
            name,
            HOROSPHERE_FIGURE,
            title=title,
            width=left + size + 20,
            height=top + size + 30,
            left=left,
            top=top,
            size=size,
            ray=ray_line,
            levels=levels,
            x_lo="%.4g" % x_lo,
            x_hi="%.4g" % x_hi,
            t_lo="%.4g" % t_lo,
            t_hi="%.4g" % t_hi,
        )
