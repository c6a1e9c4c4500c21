import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sac.errors import EmptyLevelSet, OpenCurve
from sac.field import Field2D, Grid2D
from sac.geometry import (LevelSet, enclosed_area, extract_level_set, hausdorff, l2_step_distance,
                          largest_loop, layer_width, loop_radius, point_in_polygons, signed_distance,
                          step_function)

G = Grid2D.unit_square(129)
X, Y = G.mesh()


def _cone(R, c=(0.5, 0.5)):
    return Field2D(G, np.hypot(X - c[0], Y - c[1]) - R)


def test_circle_level_set():
    ls = extract_level_set(_cone(0.3), 0.0).require()
    assert ls.all_closed and len(ls.loops) == 1
    loop = largest_loop(ls)
    assert loop_radius(loop) == pytest.approx(0.3, abs=1e-3)
    assert enclosed_area(loop) == pytest.approx(np.pi * 0.09, rel=2e-3)


def test_two_circles_give_two_loops():
    u = np.minimum(_cone(0.1, (0.25, 0.5)).u, _cone(0.15, (0.7, 0.5)).u)
    ls = extract_level_set(Field2D(G, u), 0.0)
    assert len(ls.loops) == 2 and ls.all_closed
    assert loop_radius(largest_loop(ls)) == pytest.approx(0.15, abs=2e-3)


def test_empty_level_set():
    with pytest.raises(EmptyLevelSet):
        extract_level_set(Field2D(G, np.ones(X.shape)), 0.0).require()


def test_signed_distance_of_circle():
    fld = _cone(0.25)
    ls = extract_level_set(fld, 0.0)
    sdf = signed_distance(ls, G, fld)
    assert np.abs(sdf.values - fld.u).max() < 2e-3
    assert sdf.eikonal_residual(4 * G.h, 0.2) < 0.02


def test_hausdorff_oracles():
    A = LevelSet.circle((0.5, 0.5), 0.3)
    assert hausdorff(A, A, G.h) == 0.0
    B = LevelSet.circle((0.5, 0.5), 0.32)
    assert hausdorff(A, B, G.h) == pytest.approx(0.02, abs=1e-3)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.3), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
def test_hausdorff_symmetric_and_shift(R, dx, dy):
    A = LevelSet.circle((0.5, 0.5), R, n=256)
    B = LevelSet.circle((0.5 + dx, 0.5 + dy), R, n=256)
    d = hausdorff(A, B, 0.01)
    assert d == pytest.approx(hausdorff(B, A, 0.01))
    assert d == pytest.approx(np.hypot(dx, dy), abs=0.01)


def test_point_in_polygons_even_odd():
    outer = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    hole = np.array([[0.4, 0.4], [0.6, 0.4], [0.6, 0.6], [0.4, 0.6]])
    pts = np.array([[0.2, 0.2], [0.5, 0.5], [1.5, 0.5]])
    assert point_in_polygons(pts, [outer]).tolist() == [True, True, False]
    assert point_in_polygons(pts, [outer, hole]).tolist() == [True, False, False]


def test_exact_step_has_zero_l2_distance():
    ref = LevelSet.circle((0.5, 0.5), 0.3)
    zeros = (-1.0, 0.0, 1.0)
    fld = Field2D(G, step_function(G, ref, zeros))
    assert l2_step_distance(fld, ref, zeros) == 0.0
    # the opposite phase everywhere is at distance 2 |Omega|^(1/2)
    assert l2_step_distance(Field2D(G, -fld.u), ref, zeros) == pytest.approx(2.0)
    with pytest.raises(OpenCurve):
        step_function(G, LevelSet.from_polygon([[0, 0], [1, 1]], closed=False), zeros)


@pytest.mark.parametrize("eps", [0.02, 0.04])
def test_planar_tanh_width(eps):
    eta = 0.1
    fld = Field2D(G, np.tanh((X - 0.5) / (np.sqrt(2) * eps)))
    rep = layer_width(fld, eta, extract_level_set(fld, 0.0), (-1.0, 0.0, 1.0))
    exact = 2 * np.sqrt(2) * eps * np.arctanh(1 - eta)
    # interpolation of the profile between nodes costs O(h^2 / eps)
    assert rep.width == pytest.approx(exact, rel=0.02)
    assert rep.capped == 0
    with pytest.raises(ValueError):
        layer_width(fld, 1.5, extract_level_set(fld, 0.0), (-1.0, 0.0, 1.0))


def test_width_is_not_measured_through_the_wall():
    # the minus side needs 0.083 to reach -0.9 but the wall is 0.03 away
    fld = Field2D(G, np.tanh((X - 0.03) / (np.sqrt(2) * 0.04)))
    rep = layer_width(fld, 0.1, extract_level_set(fld, 0.0), (-1.0, 0.0, 1.0))
    assert np.isnan(rep.width) and rep.per_point.size == 0 and rep.capped > 0
