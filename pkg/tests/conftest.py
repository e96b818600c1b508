"""测试共用的剖面与求解器参数"""
import pytest

from torus2poles.config import SolverSettings
from torus2poles.profile import ProfileFn, build_theorem_profile


@pytest.fixture(scope="session")
def fast() -> SolverSettings:
    """缩小打靶网格，积分器容差保持默认"""
    return SolverSettings(scan_nodes=64, max_refinements=4)


@pytest.fixture(scope="session")
def flat() -> ProfileFn:
    return ProfileFn.constant(1.0)


@pytest.fixture(scope="session")
def plateau() -> ProfileFn:
    return build_theorem_profile(0.5)


@pytest.fixture(scope="session")
def cosine() -> ProfileFn:
    return ProfileFn.cosine(1.5, 0.4)
