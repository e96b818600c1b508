"""结果输出模块 - results.json 清单与 CSV 表格"""
import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from rich.console import Console

console = Console()

# 浮点数统一以 17 位有效数字写出
FLOAT_FORMAT = "%.17g"

CSV_SCHEMAS: Dict[str, Sequence[str]] = {
    "closed-geodesics": ("k_t", "k_x", "psi0", "length", "closure_residual", "maximality_gap"),
    "displacement-map": ("cell_t", "cell_x", "value"),
    "busemann": ("x", "t", "level", "residual"),
    "pole_evidence": ("psi0", "first_jacobi_zero", "oracle_zero", "max_defect", "agrees"),
    "distance": ("t_p", "x_p", "t_q", "x_q", "value", "relation", "n_maximizers"),
    "rotation": ("branch", "slope", "oracle", "diff"),
    "axes": ("k_t", "k_x", "m", "length", "gap", "max_junction"),
}


def to_jsonable(value):
    """递归转换为可 JSON 序列化的对象；+∞ 记为字符串 "inf"，NaN 记为 null"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Path):
        return str(value)
    return value


class ArtifactWriter:
    """实验产物写出器"""

    def __init__(self, output_dir: Path):
        """
        初始化写出器

        Args:
            output_dir: 输出目录（不存在时创建）
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def write_table(self, name: str, rows: List[dict], columns: Optional[Sequence[str]] = None) -> Path:
        """
        写出 CSV 表格

        Args:
            name: 表名（文件名为 name.csv）；前缀命中 CSV_SCHEMAS 时使用其列顺序
            rows: 行字典列表
            columns: 显式列顺序

        Returns:
            CSV 路径
        """
        if columns is None:
            columns = next((cols for key, cols in CSV_SCHEMAS.items() if name.startswith(key)), None)
        frame = pd.DataFrame(rows, columns=list(columns) if columns else None)
        path = self.output_dir / f"{name}.csv"
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.written.append(path)
        console.print(f"   [green][OK][/green] {path.name} ({len(frame)} 行)")
        return path

    def write_results(self, manifest: dict) -> Path:
        """写出 results.json（键排序，保证相同输入字节一致）"""
        path = self.output_dir / "results.json"
        text = json.dumps(to_jsonable(manifest), indent=2, ensure_ascii=False, sort_keys=True)
        path.write_text(text + "\n", encoding="utf-8")
        console.print(f"   [green][OK][/green] {path.name}")
        return path
