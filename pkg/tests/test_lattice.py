"""甲板变换、时间锥、位移函数、闭测地线与轴测试"""
import math

import numpy as np
import pytest

from torus2poles.dynamics import rotation_numbers
from torus2poles.errors import NoTimelikeClassError
from torus2poles.lattice import (
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


def test_deck_apply():
    assert deck_apply(HomologyClass(2, -1), (0.5, 0.25)) == (2.5, -0.75)
    assert HomologyClass.of((3, 1)).scaled(2) == HomologyClass(6, 2)
    assert str(HomologyClass(3, 1)) == "(3,1)"


def test_flat_time_cone(flat):
    assert in_time_cone_interior(flat, HomologyClass(2, 1))
    boundary = in_time_cone_interior(flat, HomologyClass(1, 1))
    assert not boundary
    assert boundary.indeterminate
    assert not in_time_cone_interior(flat, HomologyClass(-2, 1))
    with pytest.raises(ValueError):
        in_time_cone_interior(flat, HomologyClass(0, 0))


@pytest.mark.parametrize("pair", [(1, 0), (2, 1), (1, 1), (1, 2), (3, 2), (2, 3)])
def test_cone_agrees_with_rotation(plateau, pair):
    k = HomologyClass.of(pair)
    cone = in_time_cone_interior(plateau, k)
    assert cone.indeterminate or cone.interior == cone_test_by_rotation(rotation_numbers(plateau), k)


def test_flat_displacement(flat, fast):
    assert displacement(flat, HomologyClass(2, 1), (0.3, 0.7), fast) == pytest.approx(math.sqrt(3.0), abs=1e-7)


def test_plateau_displacement(plateau, fast):
    k = HomologyClass(1, 0)
    assert displacement(plateau, k, (0.0, 0.5), fast) == pytest.approx(2.0, abs=1e-9)
    assert displacement(plateau, k, (0.0, 0.0), fast) < 2.0 - 1e-3


def test_flat_displacement_map_is_constant(flat, fast):
    field = displacement_map(flat, HomologyClass(2, 1), n_t=2, n_x=4, settings=fast)
    assert field.values.shape == (2, 4)
    assert np.ptp(field.values) <= 1e-9
    assert field.max_value == pytest.approx(math.sqrt(3.0), abs=1e-7)


def test_displacement_map_maximum_on_plateau(plateau, fast):
    field = displacement_map(plateau, HomologyClass(1, 0), n_t=2, n_x=8, settings=fast)
    assert field.solved_rows == [0, 1]
    assert field.row_spread <= 1e-9
    assert field.max_value == pytest.approx(2.0, abs=1e-9)
    assert field.argmax_columns == [2, 3, 4, 5]
    assert field.argmax_on_plateau(plateau)
    records = field.records()
    assert len(records) == 16
    assert all(r["solved"] for r in records)


def test_partial_displacement_map_marks_copied_rows(flat, fast):
    field = displacement_map(flat, HomologyClass(1, 0), n_t=3, n_x=2, settings=fast, rows=1)
    assert field.solved_rows == [0]
    assert field.row_spread == 0.0
    solved = {(r["cell_t"], r["solved"]) for r in field.records()}
    assert solved == {(0, True), (1, False), (2, False)}


def test_flat_closed_geodesic(flat, fast):
    result = closed_geodesic_through_pole(flat, (0.0, 0.0), HomologyClass(2, 1), fast)
    assert result.psi0 == pytest.approx(math.asinh(1.0 / math.sqrt(3.0)), abs=1e-10)
    assert result.period_length == pytest.approx(math.sqrt(3.0), abs=1e-10)
    assert result.closure_residual <= 1e-8
    assert result.maximality_gap <= 1e-5


def test_vertical_closed_geodesic(plateau, fast):
    result = closed_geodesic_through_pole(plateau, (0.0, 0.5), HomologyClass(1, 0), fast)
    assert result.psi0 == 0.0
    assert result.period_length == pytest.approx(2.0, abs=1e-10)
    assert result.maximality_gap <= 1e-5


@pytest.mark.parametrize("pair", [(3, 1), (5, -3)])
def test_plateau_closed_geodesic(plateau, fast, pair):
    k = HomologyClass.of(pair)
    result = closed_geodesic_through_pole(plateau, (0.0, 0.5), k, fast)
    assert math.copysign(1.0, result.psi0) == math.copysign(1.0, k.k_x)
    assert result.position_residual <= 1e-8
    assert result.angle_residual <= 1e-8
    assert result.maximality_gap <= 1e-5
    assert result.to_dict()["k_t"] == k.k_t


def test_class_outside_cone(plateau, fast):
    k = HomologyClass(1, 2)
    with pytest.raises(NoTimelikeClassError):
        closed_geodesic_through_pole(plateau, (0.0, 0.5), k, fast)
    with pytest.raises(NoTimelikeClassError):
        closed_geodesic_through_pole(plateau, (0.0, 0.5), k, fast, check_cone=False, check_maximality=False)


def test_vertical_axis(plateau, fast):
    axis = build_axis(plateau, HomologyClass(1, 0), (0.0, 0.5), m=4, settings=fast, max_check=2)
    assert axis.periods == 4
    assert axis.length == pytest.approx(8.0, abs=1e-8)
    assert axis.max_junction <= 1e-6
    assert axis.power_consistency <= 1e-6
    assert max(axis.period_gaps.values()) <= 1e-5


def test_flat_axis_direction(flat, fast):
    axis = build_axis(flat, HomologyClass(2, 1), (0.0, 0.0), m=3, settings=fast, max_check=1)
    assert axis_direction(axis) == pytest.approx(0.5, abs=1e-9)
    assert axis.max_junction <= 1e-9
    assert axis.polyline().shape[1] == 2


def test_plateau_axis_junctions(plateau, fast):
    axis = build_axis(plateau, HomologyClass(3, 1), (0.0, 0.5), m=3, settings=fast, max_check=2)
    assert axis.max_junction <= 1e-6
    assert axis.power_consistency <= 1e-6


def test_parallel_vertical_axes(plateau, fast):
    k = HomologyClass(1, 0)
    a = build_axis(plateau, k, (0.0, 0.4), m=3, settings=fast, max_check=1)
    b = build_axis(plateau, k, (0.25, 0.6), m=3, settings=fast, max_check=1)
    report = parallel_check(a, b)
    assert report.parallel
    assert report.slope_diff <= 1e-6
    assert report.min_separation == pytest.approx(0.2, abs=1e-9)
    assert report.ratio <= 1.001


def test_parallel_sloped_axes(flat, fast):
    k = HomologyClass(2, 1)
    a = build_axis(flat, k, (0.0, 0.2), m=3, settings=fast, max_check=1)
    b = build_axis(flat, k, (0.3, 0.6), m=3, settings=fast, max_check=1)
    report = parallel_check(a, b)
    assert report.parallel
    assert report.to_dict()["ratio"] <= 1.001
