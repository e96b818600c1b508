"""因果关系、Lorentz 距离与格点预言测试"""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from torus2poles.causal import (
    CAUSAL_BOUNDARY,
    CHRONOLOGICAL,
    UNRELATED,
    causal_relation,
    crossing_check,
    distance,
    distance_many,
    distance_point_set,
    grid_path_oracle,
    reflect,
    richardson_oracle,
    scan_range,
    segment_crossings,
)
from torus2poles.config import SolverSettings
from torus2poles.profile import ProfileFn

FAST = SolverSettings(scan_nodes=64, max_refinements=4)


def flat_distance(p, q, c=1.0):
    dt, dx = q[0] - p[0], q[1] - p[1]
    return math.sqrt(max(c * c * dt * dt - dx * dx, 0.0))


@pytest.mark.parametrize(
    "q, expected",
    [
        ((2.0, 1.0), CHRONOLOGICAL),
        ((1.0, 1.0), CAUSAL_BOUNDARY),
        ((1.0, -1.0), CAUSAL_BOUNDARY),
        ((1.0, 2.0), UNRELATED),
        ((-1.0, 0.0), UNRELATED),
        ((0.0, 0.0), CAUSAL_BOUNDARY),
    ],
)
def test_flat_relations(flat, q, expected):
    assert causal_relation(flat, (0.0, 0.0), q) == expected


def test_plateau_boundary(plateau):
    p = (0.0, 0.0)
    assert causal_relation(plateau, p, (plateau.null_period, 1.0)) == CAUSAL_BOUNDARY
    assert causal_relation(plateau, p, (plateau.null_period + 1e-3, 1.0)) == CHRONOLOGICAL
    assert causal_relation(plateau, p, (plateau.null_period - 1e-3, 1.0)) == UNRELATED


def test_flat_distance_values(flat):
    assert distance(flat, (0, 0), (2, 0), FAST).value == pytest.approx(2.0, abs=1e-9)
    assert distance(flat, (0, 0), (2, 1), FAST).value == pytest.approx(math.sqrt(3.0), abs=1e-7)
    assert distance(flat, (0, 0), (1, 2), FAST).value == 0.0
    boundary = distance(flat, (0, 0), (1, 1), FAST)
    assert boundary.relation == CAUSAL_BOUNDARY
    assert boundary.value == 0.0


@settings(max_examples=25, deadline=None)
@given(
    t0=st.floats(-2.0, 2.0),
    x0=st.floats(-2.0, 2.0),
    dt=st.floats(0.1, 3.0),
    dx=st.floats(-3.0, 3.0),
)
def test_flat_distance_property(t0, x0, dt, dx):
    assume(abs(dt - abs(dx)) > 1e-3)
    f = ProfileFn.constant(1.0)
    p, q = (t0, x0), (t0 + dt, x0 + dx)
    assert abs(distance(f, p, q, FAST, with_paths=False).value - flat_distance(p, q)) <= 1e-7


def test_maximizer_reaches_target(plateau):
    q = (3.0, 1.5)
    result = distance(plateau, (0.0, 0.5), q, FAST)
    assert result.relation == CHRONOLOGICAL
    assert result.maximizers
    for m in result.maximizers:
        assert m.endpoint_residual <= 1e-9
        assert m.length == pytest.approx(result.value, abs=FAST.tie_tol)
        assert m.path.end.t == pytest.approx(q[0], abs=1e-12)


def test_distance_many_matches_single(plateau):
    p = (0.0, 0.5)
    targets = [(1.0, 0.6), (2.0, 0.1), (0.5, 2.0)]
    many = distance_many(plateau, p, targets, FAST)
    for q, result in zip(targets, many):
        assert result.value == pytest.approx(distance(plateau, p, q, FAST, with_paths=False).value, abs=1e-10)
    assert many[2].relation == UNRELATED


def test_distance_matches_lattice_oracle(plateau):
    p, q = (0.0, 0.5), (1.5, 0.9)
    value = distance(plateau, p, q, FAST, with_paths=False).value
    oracle = richardson_oracle(plateau, p, q, 32)
    assert abs(value - oracle.value) <= 1e-3


def test_grid_oracle_flat(flat):
    value, xs = grid_path_oracle(flat, (0.0, 0.0), (2.0, 1.0), resolution=8)
    assert value == pytest.approx(math.sqrt(3.0), abs=1e-6)
    assert xs[0] == 0.0 and xs[-1] == 1.0


def test_grid_oracle_rejects_past(flat):
    with pytest.raises(ValueError):
        grid_path_oracle(flat, (0.0, 0.0), (-1.0, 0.0))


def test_deck_invariance(plateau):
    p, q = (0.2, 0.3), (1.4, 0.9)
    d = distance(plateau, p, q, FAST, with_paths=False).value
    moved = distance(plateau, (p[0] + 2, p[1] - 1), (q[0] + 2, q[1] - 1), FAST, with_paths=False).value
    assert abs(d - moved) <= 1e-9


def test_time_reflection_duality(plateau):
    p, q = (0.2, 0.3), (1.4, 0.9)
    d = distance(plateau, p, q, FAST, with_paths=False).value
    assert d == pytest.approx(distance(plateau, reflect(q), reflect(p), FAST, with_paths=False).value, abs=1e-9)


def test_reverse_triangle(plateau):
    p, q, r = (0.0, 0.5), (1.0, 0.6), (2.2, 0.4)
    d_pq, d_pr = distance_many(plateau, p, [q, r], FAST)
    d_qr = distance(plateau, q, r, FAST, with_paths=False)
    assert d_pr.value >= d_pq.value + d_qr.value - 1e-7


def test_distance_point_set(flat):
    value, best = distance_point_set(flat, (0, 0), [(2, 1), (2, 0), (2, -1)], FAST)
    assert value == pytest.approx(2.0, abs=1e-9)
    assert best == (2, 0)
    with pytest.raises(ValueError):
        distance_point_set(flat, (0, 0), [], FAST)


def test_scan_range_covers_maximizer(plateau):
    p, q = (0.0, 0.5), (3.0, 1.5)
    result = distance(plateau, p, q, FAST, with_paths=False)
    assert all(abs(psi0) <= scan_range(plateau, p, q) for psi0 in result.psi0s)


def test_segment_crossings():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    i, j, hits = segment_crossings(a, b)
    assert len(i) == 1
    assert hits[0] == pytest.approx([0.5, 0.5])
    parallel = np.array([[0.0, 0.5], [1.0, 1.5]])
    assert len(segment_crossings(a, parallel)[0]) == 0


def test_flat_maximizers_cross_once(flat):
    first = distance(flat, (0.0, 0.0), (2.0, 1.0), FAST).maximizers[0].path
    second = distance(flat, (0.0, 1.0), (2.0, 0.0), FAST).maximizers[0].path
    shifted = distance(flat, (0.0, 0.5), (2.0, 1.5), FAST).maximizers[0].path
    assert crossing_check(first, second) == 1
    assert crossing_check(first, shifted) == 0


def test_distance_many_shared_times(plateau):
    p = (0.0, 0.5)
    targets = [(1.0, 0.6), (1.0, 0.9), (-0.5, 0.5), (1.0, 0.6), (0.0, 0.7)]
    many = distance_many(plateau, p, targets, FAST)
    assert many[0].value == pytest.approx(many[3].value, abs=1e-12)
    for k in (0, 1):
        single = distance(plateau, p, targets[k], FAST, with_paths=False).value
        assert many[k].value == pytest.approx(single, abs=1e-10)
    assert many[2].value == 0.0 and many[4].value == 0.0


def test_distance_point_set_on_one_slice(plateau):
    points = [(2.0, 0.5 + dx) for dx in (-0.4, -0.2, 0.0, 0.2, 0.4)]
    value, best = distance_point_set(plateau, (0.0, 0.5), points, FAST)
    assert value == pytest.approx(4.0, abs=1e-9)
    assert best == (2.0, 0.5)


def test_lattice_levels_are_lengths(plateau):
    p, q = (0.0, 0.5), (1.5, 0.9)
    oracle = richardson_oracle(plateau, p, q, 32)
    shooting = distance(plateau, p, q, FAST, with_paths=False).value
    assert all(abs(level - shooting) <= 1e-2 for level in oracle.levels)
    # 折线起点含类空段时退回动态规划
    value, xs = grid_path_oracle(plateau, p, q, resolution=64, start=np.array([0.5, 3.0, 0.9]))
    assert abs(value - shooting) <= 1e-2
    assert xs[0] == 0.5 and xs[-1] == 0.9
