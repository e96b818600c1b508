"""异常定义模块 - 实验室中所有可预期的失败"""
from typing import List, Optional


# 退出码：0 通过，1 检查失败，2 配置错误，3 求解器不一致
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_INCONSISTENCY = 3


class Torus2PolesError(Exception):
    """所有自定义异常的基类"""

    exit_code = EXIT_SOLVER_INCONSISTENCY


class ProfileDomainError(Torus2PolesError, ValueError):
    """剖面函数参数越界（例如 ε 不在 (0,1) 内）"""

    exit_code = EXIT_CONFIG_ERROR


class StopUnreachableError(Torus2PolesError):
    """坐标停止条件在 τ 预算内无法到达，携带已积分的部分路径"""

    def __init__(self, message: str, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


class SolverInconsistencyError(Torus2PolesError):
    """数值结果与数学上必然成立的性质矛盾（网格或区间设置有误）"""


class NoTimelikeClassError(Torus2PolesError):
    """同调类不在稳定时间锥内部，不存在对应的闭类时测地线"""


class ConfigError(Torus2PolesError):
    """配置文件错误，带行列号诊断"""

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, diagnostics: List[str], path: Optional[str] = None):
        self.diagnostics = diagnostics
        self.path = path
        super().__init__("\n".join(diagnostics))
