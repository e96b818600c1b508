"""剖面函数模块 - 生成度量族 g_f = -f²(x)dt² + dx² 的 1-周期函数 f"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple

import numpy as np
from scipy import integrate

from .errors import ProfileDomainError

PERIOD = 1.0
MAX_LOCUS_TOL = 1e-12

# exp(-1/u) 在 u < 1/700 时已低于双精度下限
_TINY = 1.0 / 700.0


def _bump(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """φ(u) = exp(-1/u)（u > 0），否则为 0；返回 φ, φ', φ''"""
    pos = u > _TINY
    us = np.where(pos, u, 1.0)
    e = np.where(pos, np.exp(-1.0 / us), 0.0)
    inv2 = 1.0 / us**2
    d1 = e * inv2
    d2 = e * (1.0 - 2.0 * us) * inv2 * inv2
    return e, d1, d2


def smooth_step(u) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    C∞ 过渡函数 S(u) = φ(u) / (φ(u) + φ(1-u))

    u ≤ 0 时 S = 0，u ≥ 1 时 S = 1，中间严格单调。

    Returns:
        (S, S', S'')
    """
    u = np.asarray(u, dtype=float)
    a, a1, a2 = _bump(u)
    b, b1, b2 = _bump(1.0 - u)
    # 对 u 求导时 φ(1-u) 的一阶导数变号
    b1 = -b1
    d = a + b
    n = a1 * b - a * b1
    s = a / d
    s1 = n / d**2
    s2 = (a2 * b - a * b2) / d**2 - 2.0 * n * (a1 + b1) / d**3
    return s, s1, s2


@dataclass(frozen=True)
class ProfileFn:
    """
    周期剖面函数 f（周期固定为 1）

    kind 取 constant(c)、cosine(a, b) 或 theorem_plateau(ε)，
    只有对应种类的参数有意义。构造后不可变。
    """

    kind: str
    c: float = 1.0
    a: float = 0.0
    b: float = 0.0
    epsilon: float = 0.0

    @classmethod
    def constant(cls, c: float) -> "ProfileFn":
        if not c > 0:
            raise ProfileDomainError(f"常数剖面需要 c > 0，实际为 {c}")
        return cls(kind="constant", c=float(c))

    @classmethod
    def cosine(cls, a: float, b: float) -> "ProfileFn":
        """f(x) = a + b·cos(2πx)"""
        if not a > abs(b):
            raise ProfileDomainError(f"cosine 剖面需要 a > |b|，实际为 a={a}, b={b}")
        return cls(kind="cosine", a=float(a), b=float(b))

    @property
    def period(self) -> float:
        return PERIOD

    @property
    def label(self) -> str:
        if self.kind == "constant":
            return f"constant({self.c:g})"
        if self.kind == "cosine":
            return f"cosine({self.a:g}, {self.b:g})"
        return f"theorem_plateau({self.epsilon:g})"

    @property
    def f_min(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "cosine":
            return self.a - abs(self.b)
        return 0.5

    @property
    def f_max(self) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "cosine":
            return self.a + abs(self.b)
        return 2.0

    @property
    def max_locus(self) -> List[Tuple[float, float]]:
        """[0,1) 中 f = f_max 的闭区间列表（解析给出）"""
        if self.kind == "constant" or (self.kind == "cosine" and self.b == 0):
            return [(0.0, 1.0)]
        if self.kind == "cosine":
            x0 = 0.0 if self.b > 0 else 0.5
            return [(x0, x0)]
        return [(self.epsilon / 2, 1.0 - self.epsilon / 2)]

    @property
    def breakpoints(self) -> List[float]:
        """[0,1] 中导数变化剧烈的位置，供求积分段使用"""
        if self.kind == "theorem_plateau":
            e = self.epsilon
            return [e / 4, e / 2, 1.0 - e / 2, 1.0 - e / 4]
        return []

    def eval(self, x):
        """
        计算 f(x), f'(x), f''(x)

        Args:
            x: 实数或数组，内部按周期 1 约化

        Returns:
            (f, f', f'')，标量输入返回 float
        """
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            f = np.full_like(x, self.c)
            f1 = np.zeros_like(x)
            f2 = np.zeros_like(x)
        elif self.kind == "cosine":
            w = 2.0 * math.pi * x
            f = self.a + self.b * np.cos(w)
            f1 = -2.0 * math.pi * self.b * np.sin(w)
            f2 = -4.0 * math.pi**2 * self.b * np.cos(w)
        else:
            y = np.mod(x, PERIOD)
            # 到最近整数的距离，f 关于 x = 0 对称
            z = np.minimum(y, PERIOD - y)
            dz = np.where(y < 0.5, 1.0, -1.0)
            width = self.epsilon / 4
            s, s1, s2 = smooth_step((z - width) / width)
            f = 0.5 + 1.5 * s
            f1 = 1.5 * s1 * dz / width
            f2 = 1.5 * s2 / width**2
        if scalar:
            return float(f), float(f1), float(f2)
        return f, f1, f2

    def value(self, x):
        """只返回 f(x)"""
        return self.eval(x)[0]

    def in_max_locus(self, x: float, tol: float = MAX_LOCUS_TOL) -> bool:
        """x（按周期约化）是否落在 max_locus 中"""
        y = float(np.mod(x, PERIOD))
        for lo, hi in self.max_locus:
            for shift in (-PERIOD, 0.0, PERIOD):
                if lo - tol <= y + shift <= hi + tol:
                    return True
        return False

    @cached_property
    def null_period(self) -> float:
        """P = ∫₀¹ dx/f(x)"""
        return null_period(self)

    def inverse_integral(self, lo: float, hi: float) -> float:
        """∫_lo^hi dx/f(x)，lo、hi 为任意实数"""
        if hi < lo:
            return -self.inverse_integral(hi, lo)
        return self._primitive(hi) - self._primitive(lo)

    def _primitive(self, x: float) -> float:
        whole = math.floor(x)
        frac = x - whole
        return whole * self.null_period + _quad_inverse(self, 0.0, frac)

    def to_dict(self) -> dict:
        data = {"kind": self.kind, "label": self.label}
        if self.kind == "constant":
            data["c"] = self.c
        elif self.kind == "cosine":
            data.update(a=self.a, b=self.b)
        else:
            data["epsilon"] = self.epsilon
        data.update(f_min=self.f_min, f_max=self.f_max, max_locus=[list(iv) for iv in self.max_locus])
        return data


def _quad_inverse(f: ProfileFn, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    if f.kind == "constant":
        return (hi - lo) / f.c
    return _quad_profile(f, lambda s: 1.0 / f.eval(s)[0], lo, hi)


def _quad_profile(f: ProfileFn, integrand, lo: float, hi: float) -> float:
    points = [p for p in f.breakpoints if lo < p < hi]
    value, _ = integrate.quad(
        integrand,
        lo,
        hi,
        points=points or None,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200,
    )
    return value


def build_theorem_profile(epsilon: float) -> ProfileFn:
    """
    构造平台剖面：[−ε/4, ε/4] 上 f ≡ 1/2，[ε/2, 1−ε/2] 上 f ≡ 2，中间用 C∞ 过渡

    Args:
        epsilon: 0 < ε < 1

    Returns:
        f_min = 1/2, f_max = 2 的剖面
    """
    if not 0.0 < epsilon < 1.0:
        raise ProfileDomainError(f"ε 必须在 (0, 1) 内，实际为 {epsilon}")
    return ProfileFn(kind="theorem_plateau", epsilon=float(epsilon))


def null_period(f: ProfileFn) -> float:
    """自适应求积计算 ∫₀¹ dx/f(x)，绝对误差 ≤ 1e-10"""
    return _quad_inverse(f, 0.0, PERIOD)


def profile_from_spec(kind: str, c: float = 1.0, a: float = 1.5, b: float = 0.4, epsilon: float = 0.5) -> ProfileFn:
    """根据配置文件中的 kind + 参数构造剖面"""
    if kind == "constant":
        return ProfileFn.constant(c)
    if kind == "cosine":
        return ProfileFn.cosine(a, b)
    if kind == "theorem_plateau":
        return build_theorem_profile(epsilon)
    raise ProfileDomainError(f"未知的剖面类型: {kind}")


def mean_value(f: ProfileFn) -> float:
    """∫₀¹ f(x) dx，即单位时间周期内环面的 g_f 体积"""
    if f.kind == "constant":
        return f.c
    return _quad_profile(f, lambda s: f.eval(s)[0], 0.0, PERIOD)


def volume_fraction_of_poles(f: ProfileFn) -> float:
    """
    max_locus 上的点（均为类时极点）在体积形式 f(x) dx dt 下所占的比例

    max_locus 上 f ≡ f_max，因此分子为 f_max 乘以其长度；平台剖面上该比例不小于 1 − ε。
    """
    length = sum(hi - lo for lo, hi in f.max_locus)
    if f.kind == "constant" or length == 1.0:
        return 1.0
    return f.f_max * length / mean_value(f)
