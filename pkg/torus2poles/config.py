"""配置模块 - 环境默认值、求解器参数与实验配置文件"""
import configparser
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError

Point = Tuple[float, float]
ClassPair = Tuple[int, int]

EXPERIMENT_NAMES = (
    "classify",
    "certify-pole",
    "distance",
    "closed-geodesics",
    "displacement-map",
    "busemann",
    "selftest",
)
ExperimentName = Literal[
    "classify",
    "certify-pole",
    "distance",
    "closed-geodesics",
    "displacement-map",
    "busemann",
    "selftest",
]


class Settings(BaseSettings):
    """运行环境配置，从 .env 文件或 T2P_ 前缀的环境变量读取"""

    output_dir: Path = Field(default=Path("./output"))
    threads: int = Field(default=1, ge=1)
    seed: int = 0
    quiet: bool = False

    model_config = SettingsConfigDict(
        env_prefix="T2P_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @property
    def is_parallel(self) -> bool:
        """是否启用多进程网格扫描"""
        return self.threads > 1


def get_settings() -> Settings:
    """获取配置实例"""
    return Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SolverSettings(_Section):
    """数值求解器参数（积分器容差、打靶网格、各类判定阈值）"""

    method: Literal["DOP853", "RK45"] = "DOP853"
    rtol: float = Field(default=1e-12, gt=0)
    atol: float = Field(default=1e-12, gt=0)
    drift_bound: float = Field(default=1e-8, gt=0)
    tau_budget: float = Field(default=1000.0, gt=0)
    scan_nodes: int = Field(default=512, ge=8)
    max_refinements: int = Field(default=6, ge=1)
    tie_tol: float = Field(default=1e-9, gt=0)
    causal_tol: float = Field(default=1e-10, gt=0)
    root_tol: float = Field(default=1e-14, gt=0)


def _parse_floats(text: str) -> List[float]:
    return [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]


def parse_point(value) -> Point:
    """解析 "t, x" 形式的点"""
    if isinstance(value, str):
        value = _parse_floats(value)
    values = tuple(float(v) for v in value)
    if len(values) != 2:
        raise ValueError(f"点需要两个坐标 (t, x)，实际为 {len(values)} 个")
    return values


def parse_points(value) -> Tuple[float, ...]:
    if isinstance(value, str):
        return tuple(_parse_floats(value))
    return tuple(float(v) for v in value)


def parse_classes(value) -> Tuple[ClassPair, ...]:
    """解析 "1,0; 2,1" 形式的同调类列表"""
    if isinstance(value, str):
        items = [item for item in value.split(";") if item.strip()]
        pairs = []
        for item in items:
            parts = [p for p in re.split(r"[,\s]+", item.strip()) if p]
            if len(parts) != 2:
                raise ValueError(f"同调类格式应为 k_t,k_x: {item.strip()!r}")
            pairs.append((int(parts[0]), int(parts[1])))
        return tuple(pairs)
    return tuple((int(a), int(b)) for a, b in value)


def parse_pairs(value) -> Tuple[Tuple[Point, Point], ...]:
    """解析 "t,x -> t,x; ..." 形式的点对列表"""
    if isinstance(value, str):
        pairs = []
        for item in value.split(";"):
            if not item.strip():
                continue
            if "->" not in item:
                raise ValueError(f"点对需要 '->' 分隔: {item.strip()!r}")
            left, right = item.split("->", 1)
            pairs.append((parse_point(left), parse_point(right)))
        return tuple(pairs)
    return tuple((parse_point(p), parse_point(q)) for p, q in value)


class ExperimentSection(_Section):
    name: ExperimentName = "selftest"
    seed: int = 0
    output_dir: Optional[Path] = None


class ProfileSection(_Section):
    kind: Literal["constant", "cosine", "theorem_plateau"] = "theorem_plateau"
    c: float = Field(default=1.0, gt=0)
    a: float = 1.5
    b: float = 0.4
    epsilon: float = Field(default=0.5, gt=0, lt=1)

    @model_validator(mode="after")
    def check_cosine(self):
        if self.kind == "cosine" and not self.a > abs(self.b):
            raise ValueError("cosine 剖面要求 a > |b| 以保证 f > 0")
        return self


class PoleSection(_Section):
    point: Point = (0.0, 0.5)
    horizon: float = Field(default=100.0, gt=0)
    n_angles: int = Field(default=64, ge=8)
    angle_span: float = Field(default=1.5, gt=0)
    defect_tol: float = Field(default=1e-6, gt=0)
    cut_probes: int = Field(default=16, ge=2)
    probe_span: float = Field(default=0.5, gt=0)
    probe_times: int = Field(default=12, ge=2)

    @field_validator("point", mode="before")
    @classmethod
    def check_point(cls, value):
        return parse_point(value)


class DistanceSection(_Section):
    pairs: Tuple[Tuple[Point, Point], ...] = (((0.0, 0.5), (3.0, 1.5)),)
    oracle_resolution: int = Field(default=32, ge=4)

    @field_validator("pairs", mode="before")
    @classmethod
    def check_pairs(cls, value):
        return parse_pairs(value)


class LatticeSection(_Section):
    classes: Tuple[ClassPair, ...] = ((1, 0), (2, 1), (3, 1), (3, 2), (5, 3))
    map_classes: Tuple[ClassPair, ...] = ((1, 0), (3, 1))
    grid_t: int = Field(default=64, ge=1)
    grid_x: int = Field(default=64, ge=2)
    axis_periods: int = Field(default=4, ge=1)
    # 缺省时逐行求解整个网格
    solved_rows: Optional[int] = Field(default=None, ge=1)

    @field_validator("classes", "map_classes", mode="before")
    @classmethod
    def check_classes(cls, value):
        return parse_classes(value)


class BusemannSection(_Section):
    base: Point = (0.0, 0.5)
    s_start: float = Field(default=4.0, gt=0)
    s_max: float = Field(default=16384.0, gt=0)
    tol: float = Field(default=1e-6, gt=0)
    extrapolate: bool = True
    levels: Tuple[float, ...] = (1.0, 4.0)
    samples: int = Field(default=64, ge=2)
    x_halfwidth: float = Field(default=0.25, gt=0)

    @field_validator("base", mode="before")
    @classmethod
    def check_base(cls, value):
        return parse_point(value)

    @field_validator("levels", mode="before")
    @classmethod
    def check_levels(cls, value):
        return parse_points(value)


class SelftestSection(_Section):
    cases: str = "all"
    clairaut_samples: int = Field(default=100, ge=1)
    clairaut_horizon: float = Field(default=200.0, gt=0)
    flat_pairs: int = Field(default=1000, ge=1)
    triples: int = Field(default=1000, ge=1)
    crossing_pairs: int = Field(default=100, ge=1)
    deck_cases: int = Field(default=100, ge=1)
    busemann_points: int = Field(default=100, ge=1)
    busemann_pairs: int = Field(default=200, ge=1)

    @property
    def case_list(self) -> Optional[List[str]]:
        """None 表示运行全部用例"""
        if self.cases.strip().lower() == "all":
            return None
        return [c.strip() for c in self.cases.split(",") if c.strip()]


class ExperimentConfig(_Section):
    """一次实验运行的完整配置"""

    experiment: ExperimentSection = ExperimentSection()
    profile: ProfileSection = ProfileSection()
    solver: SolverSettings = SolverSettings()
    pole: PoleSection = PoleSection()
    distance: DistanceSection = DistanceSection()
    lattice: LatticeSection = LatticeSection()
    busemann: BusemannSection = BusemannSection()
    selftest: SelftestSection = SelftestSection()

    def with_overrides(
        self,
        name: Optional[str] = None,
        seed: Optional[int] = None,
        output_dir: Optional[Path] = None,
    ) -> "ExperimentConfig":
        """命令行参数覆盖配置文件中的值"""
        update = {}
        if name is not None:
            update["name"] = name
        if seed is not None:
            update["seed"] = seed
        if output_dir is not None:
            update["output_dir"] = output_dir
        if not update:
            return self
        data = self.experiment.model_dump()
        data.update(update)
        try:
            experiment = ExperimentSection.model_validate(data)
        except ValidationError as e:
            raise ConfigError([f"<cli>: {err['msg']}" for err in e.errors()])
        return self.model_copy(update={"experiment": experiment})


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^(\s*)([^\s#;\[=:][^=:]*?)\s*[=:]")


def _locate(text: str) -> Dict[Tuple[str, Optional[str]], Tuple[int, int]]:
    """记录每个节与键在文件中的行列号（均从 1 开始）"""
    positions: Dict[Tuple[str, Optional[str]], Tuple[int, int]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            positions.setdefault((section, None), (lineno, line.index("[") + 1))
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            key = m.group(2).strip().lower()
            positions.setdefault((section, key), (lineno, len(m.group(1)) + 1))
    return positions


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """解析配置文本并校验，出错时抛出带行列号的 ConfigError"""
    parser = configparser.ConfigParser(
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
    )
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError([f"{source}:{e.lineno}:1: 缺少节标题 [section]"], source)
    except configparser.ParsingError as e:
        raise ConfigError([f"{source}:{lineno}:1: 无法解析的行 {line}" for lineno, line in e.errors], source)
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigError([f"{source}:{e.lineno or 0}:1: {e.message}"], source)

    data = {section: dict(parser.items(section)) for section in parser.sections()}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        positions = _locate(text)
        diagnostics = []
        for err in e.errors():
            loc = [str(part) for part in err["loc"]]
            section = loc[0].lower() if loc else ""
            key = loc[1].lower() if len(loc) > 1 else None
            lineno, col = positions.get((section, key), positions.get((section, None), (0, 0)))
            where = ".".join(loc)
            diagnostics.append(f"{source}:{lineno}:{col}: {where}: {err['msg']}")
        raise ConfigError(diagnostics, source)


def load_config(path: Path) -> ExperimentConfig:
    """读取 UTF-8 配置文件"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([f"{path}:0:0: 无法读取配置文件: {e}"], str(path))
    except UnicodeDecodeError as e:
        raise ConfigError([f"{path}:0:{e.start}: 配置文件不是有效的 UTF-8"], str(path))
    return parse_config_text(text, source=str(path))
