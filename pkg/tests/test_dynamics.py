"""测地流、零曲线、Jacobi 场与旋转数测试"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus2poles.config import SolverSettings
from torus2poles.dynamics import (
    PhaseState,
    StoppingCondition,
    clairaut,
    curvature_term,
    flow,
    flow_fan,
    focusing_times,
    jacobi_zeros,
    measure_elapsed_time,
    null_flow,
    null_path_residual,
    rotation_numbers,
    shoot,
    time_reflect,
    unit_speed_defect,
)
from torus2poles.errors import StopUnreachableError
from torus2poles.profile import ProfileFn, build_theorem_profile

MEASURE = SolverSettings(drift_bound=math.inf)


def test_flat_vertical_geodesic(flat):
    end = flow(flat, PhaseState(0.0, 0.0, 0.0), StoppingCondition.tau(2.0)).end
    assert (end.t, end.x, end.psi, end.tau) == pytest.approx((2.0, 0.0, 0.0, 2.0), abs=1e-12)


@pytest.mark.parametrize("psi0", [-1.2, 0.3, 0.7])
def test_flat_straight_line(flat, psi0):
    path = flow(flat, PhaseState(0.5, 0.2, psi0), StoppingCondition.tau(3.0))
    end = path.end
    assert end.t == pytest.approx(0.5 + 3.0 * math.cosh(psi0), abs=1e-10)
    assert end.x == pytest.approx(0.2 + 3.0 * math.sinh(psi0), abs=1e-10)
    assert end.psi == pytest.approx(psi0, abs=1e-12)
    mid = path.state_at(1.5)
    assert mid.x == pytest.approx(0.2 + 1.5 * math.sinh(psi0), abs=1e-10)


def test_plateau_vertical_geodesic(plateau):
    end = flow(plateau, PhaseState(0.0, 0.5, 0.0), StoppingCondition.tau(4.0)).end
    assert end.t == pytest.approx(2.0, abs=1e-12)
    assert end.x == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize(
    "f, state, expected",
    [
        (ProfileFn.constant(1.0), PhaseState(0, 0, 0), 1.0),
        (build_theorem_profile(0.5), PhaseState(0, 0.5, 0), 2.0),
        (ProfileFn.constant(1.0), PhaseState(0, 0, math.asinh(1.0)), math.sqrt(2.0)),
    ],
)
def test_clairaut_constants(f, state, expected):
    assert clairaut(f, state) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=5, deadline=None)
@given(
    t0=st.floats(0.0, 1.0),
    x0=st.floats(0.0, 1.0),
    psi0=st.floats(-1.0, 1.0),
)
def test_clairaut_drift_on_cosine(t0, x0, psi0):
    f = ProfileFn.cosine(1.5, 0.4)
    path = flow(f, PhaseState(t0, x0, psi0), StoppingCondition.tau(200.0), MEASURE)
    assert path.drift <= 1e-8
    assert np.all(np.diff(path.t) > 0)


@pytest.mark.parametrize("psi", [-2.0, -0.5, 0.0, 0.5, 2.0])
def test_unit_speed(cosine, psi):
    state = PhaseState(0.0, 0.3, psi)
    assert unit_speed_defect(cosine, state) / math.cosh(psi) ** 2 <= 1e-14


def test_stop_at_time(cosine):
    path = flow(cosine, PhaseState(0.0, 0.1, 0.4), StoppingCondition.time(3.0))
    assert path.end.t == pytest.approx(3.0, abs=1e-12)
    assert path.event_residual <= 1e-12


def test_stop_at_x(plateau):
    path = flow(plateau, PhaseState(0.0, 0.5, 0.3), StoppingCondition.x_at_least(1.5))
    assert path.end.x == pytest.approx(1.5, abs=1e-12)
    assert np.all(np.diff(path.x) > 0)


def test_unreachable_x_stop_keeps_partial_path(plateau):
    budget = SolverSettings(tau_budget=5.0)
    with pytest.raises(StopUnreachableError) as info:
        flow(plateau, PhaseState(0.0, 0.5, 0.0), StoppingCondition.x_at_least(1.0), budget)
    partial = info.value.partial_path
    assert partial is not None
    assert partial.end.tau == pytest.approx(5.0)


def test_escape_from_pole_is_monotone(plateau):
    path = flow(plateau, PhaseState(0.0, 0.5, 0.3), StoppingCondition.tau(20.0))
    assert np.all(np.diff(path.x) > 0)
    assert np.all(path.psi > 0)


def test_time_reflection_round_trip(cosine):
    s0 = PhaseState(0.2, 0.7, -0.4)
    forward = flow(cosine, s0, StoppingCondition.tau(20.0), MEASURE)
    back = flow(cosine, time_reflect(forward.end), StoppingCondition.tau(20.0), MEASURE).end
    restored = time_reflect(back)
    assert (restored.t, restored.x, restored.psi) == pytest.approx((s0.t, s0.x, s0.psi), abs=1e-7)


def test_translated_path(flat):
    path = flow(flat, PhaseState(0.0, 0.0, 0.5), StoppingCondition.tau(1.0))
    moved = path.translated(2.0, 1.0, 1.0)
    assert moved.start.point == pytest.approx((2.0, 1.0))
    assert moved.state_at(1.5).x == pytest.approx(path.state_at(0.5).x + 1.0, abs=1e-12)
    assert moved.length == pytest.approx(path.length)


def test_curvature_term_sign(cosine):
    # f 的极小点处 f'' > 0，测地线聚焦
    assert curvature_term(cosine, 0.5) > 0
    assert curvature_term(cosine, 0.0) < 0


def test_jacobi_zeros_flat_and_pole(flat, plateau):
    assert jacobi_zeros(flat, PhaseState(0, 0, 0.4), 50.0) == []
    for psi0 in (-1.0, 0.0, 0.6):
        assert jacobi_zeros(plateau, PhaseState(0, 0.5, psi0), 100.0) == []


def test_jacobi_zeros_match_focusing(cosine):
    s0 = PhaseState(0.0, 0.5, 0.0)
    zeros = jacobi_zeros(cosine, s0, 5.0)
    oracle = focusing_times(cosine, s0, 5.0)
    assert zeros
    assert len(zeros) == len(oracle)
    assert np.allclose(zeros, oracle, atol=1e-4)


def test_jacobi_rejects_bad_horizon(flat):
    with pytest.raises(ValueError):
        jacobi_zeros(flat, PhaseState(0, 0, 0), 0.0)


def test_null_curves(flat):
    path = null_flow(flat, (0.0, 0.0), "plus", StoppingCondition.time(3.0))
    assert path.end == pytest.approx((3.0, 3.0), abs=1e-12)
    path = null_flow(flat, (0.0, 0.0), "minus", StoppingCondition.time(3.0))
    assert path.end == pytest.approx((3.0, -3.0), abs=1e-12)


def test_null_curve_period():
    path = null_flow(ProfileFn.constant(2.0), (0.0, 0.0), "plus", StoppingCondition.x_at_least(1.0))
    assert path.end[0] == pytest.approx(0.5, abs=1e-12)
    assert measure_elapsed_time(path) == pytest.approx(0.5, abs=1e-12)


def test_null_curve_period_plateau(plateau):
    path = null_flow(plateau, (0.0, 0.0), "plus", StoppingCondition.x_at_least(1.0))
    assert path.end[0] == pytest.approx(plateau.null_period, abs=1e-8)
    assert null_path_residual(plateau, path) <= 1e-10


def test_null_curve_wrong_direction(flat):
    with pytest.raises(StopUnreachableError):
        null_flow(flat, (0.0, 0.0), "minus", StoppingCondition.x_at_least(1.0))
    with pytest.raises(ValueError):
        null_flow(flat, (0.0, 0.0), "sideways", StoppingCondition.time(1.0))


@pytest.mark.parametrize("c", [1.0, 2.0])
def test_rotation_numbers_constant(c):
    rotation = rotation_numbers(ProfileFn.constant(c))
    assert (rotation.m_minus, rotation.m_plus) == pytest.approx((-c, c))
    assert rotation.is_class_a


def test_rotation_numbers_cross_check(plateau):
    rotation = rotation_numbers(plateau)
    assert rotation.cross_check <= 1e-6
    assert rotation.m_plus == pytest.approx(1.0 / plateau.null_period)


def test_flat_fan(flat):
    psi0s = [-0.8, 0.0, 0.5]
    x, psi, tau = flow_fan(flat, (1.0, 0.2), psi0s, [3.0, 2.0])
    for k, psi0 in enumerate(psi0s):
        assert x[0, k] == pytest.approx(0.2 + 2.0 * math.tanh(psi0), abs=1e-10)
        assert x[1, k] == pytest.approx(0.2 + math.tanh(psi0), abs=1e-10)
        assert tau[0, k] == pytest.approx(2.0 / math.cosh(psi0), abs=1e-10)
    assert np.allclose(psi, np.array([psi0s, psi0s]), atol=1e-12)


def test_shoot_matches_flow(cosine):
    x, psi, tau = shoot(cosine, (0.0, 0.3), 0.6, 2.5)
    end = flow(cosine, PhaseState(0.0, 0.3, 0.6), StoppingCondition.time(2.5)).end
    assert (x, psi, tau) == pytest.approx((end.x, end.psi, end.tau), abs=1e-8)


@pytest.mark.parametrize("psi0", [0.3, 1.0, 1.5])
def test_long_flow_from_pole(plateau, psi0):
    s0 = PhaseState(0.0, 0.5, psi0)
    path = flow(plateau, s0, StoppingCondition.tau(100.0))
    assert path.end.tau == pytest.approx(100.0)
    assert path.drift <= 1e-8
    assert np.all(np.diff(path.x) > 0)
    assert jacobi_zeros(plateau, s0, 100.0) == []


def test_fan_with_repeated_and_past_times(cosine):
    x, _, tau = flow_fan(cosine, (0.5, 0.1), [-0.3, 0.4], [2.0, 0.2, 2.0, 0.5, 1.0])
    assert np.array_equal(x[0], x[2])
    assert np.allclose(x[1], 0.1) and np.allclose(x[3], 0.1)
    assert np.all(tau[1] == 0.0)
    single = shoot(cosine, (0.5, 0.1), 0.4, 1.0)
    assert x[4, 1] == pytest.approx(single[0], abs=1e-10)
