import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tableturn.geometry import (PlacedTable, Pose, TableSpec, incline, place_batch, place_vertices,
                                segment_slope, slope, top_corners, up_normal)
from tableturn.ground import Flat, Plane

angle = st.floats(-math.pi, math.pi, allow_nan=False)
tilt = st.floats(-math.pi / 2, math.pi / 2, allow_nan=False)
ratio = st.floats(0.05, 1.0, allow_nan=False)


def test_table_spec():
    s = TableSpec(1.0)
    assert s.half_angle == pytest.approx(math.pi / 2)
    assert s.short_side == pytest.approx(math.sqrt(2))
    r = TableSpec(0.5)
    assert r.short_side / r.long_side == pytest.approx(0.5)
    assert r.short_side ** 2 + r.long_side ** 2 == pytest.approx(4.0)
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(ValueError):
            TableSpec(bad)
    with pytest.raises(ValueError):
        TableSpec(1.0, -0.5)
    assert TableSpec(0.5).with_legs(0.9) == TableSpec(0.5, 0.9)


def test_place_square_flat():
    t = place_vertices(TableSpec(1.0), Pose(0.0, 1.0, 0.0), Flat())
    np.testing.assert_allclose(t.vertices, [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], atol=1e-15)


def test_place_rectangle_flat():
    t = place_vertices(TableSpec(0.5), Pose(0.0, 1.0, 0.0), Flat())
    np.testing.assert_allclose(t.B, [0.6, 0.8, 0.0], atol=1e-15)


def test_place_upright():
    t = place_vertices(TableSpec(1.0), Pose(0.0, 1.0, -math.pi / 2), Flat())
    np.testing.assert_allclose(t.B, [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(t.D, [0, 0, -1], atol=1e-15)


def test_place_rejects_unseated_pose():
    with pytest.raises(ValueError, match="seat"):
        place_vertices(TableSpec(1.0), Pose(0.0, 0.9, 0.0), Flat())


def test_place_on_plane_seats_exactly():
    g = Plane(0.5, 0.0)
    t = 2 / math.sqrt(5)
    table = place_vertices(TableSpec(1.0), Pose(0.0, t, 0.3), g)
    assert table.A[2] == g(*table.A[:2])
    assert table.C[2] == g(*table.C[:2])


@given(angle, st.floats(0.1, 1.0), tilt, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), ratio)
def test_frame_and_rectangle_invariants(gamma, t, theta, za, zc, r):
    # any (t, zA, zC) with the right diagonal length: rescale t
    dz = za - zc
    if dz * dz >= 4:
        return
    t = math.sqrt(4 - dz * dz) / 2
    A, B, C, D, u, e2, n = (np.asarray(x) for x in place_batch(TableSpec(r).half_angle, gamma, t,
                                                                 theta, za, zc))
    for v in (u, e2, n):
        assert abs(np.linalg.norm(v) - 1) <= 1e-12
    assert abs(u @ e2) <= 1e-12 and abs(u @ n) <= 1e-12 and abs(e2 @ n) <= 1e-12
    M = 0.5 * (A + C)
    assert M[0] == pytest.approx(0, abs=1e-12) and M[1] == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(A + C, B + D, atol=1e-12)
    for V in (A, B, C, D):
        assert abs(np.linalg.norm(V - M) - 1) <= 1e-12
    AB, BC = B - A, C - B
    assert abs(AB @ BC) <= 1e-12
    assert abs(AB @ AB + BC @ BC - 4) <= 1e-10
    assert abs(np.cross(AB, BC) @ (D - A)) <= 1e-12  # planar
    assert np.linalg.norm(AB) <= np.linalg.norm(BC) + 1e-12  # AB is the short side
    assert n[2] >= -1e-15


@given(angle, ratio)
def test_counterclockwise_seen_from_normal(gamma, r):
    A, B, C, D, _, _, n = place_batch(TableSpec(r).half_angle, gamma, 1.0, 0.2, 0.0, 0.0)
    for P, Q in ((A, B), (B, C), (C, D), (D, A)):
        assert np.cross(P, Q) @ n > 0


def test_vectorized_batch():
    gam = np.linspace(0, 3, 5)
    A, B, *_ = place_batch(math.pi / 2, gam, np.ones(5), 0.0, 0.0, 0.0)
    assert A.shape == (5, 3) and B.shape == (5, 3)
    np.testing.assert_allclose(B[:, :2], np.column_stack([-np.sin(gam), np.cos(gam)]), atol=1e-15)


@given(st.floats(0, 2 * math.pi))
def test_quarter_turn_relabels_square(gamma):
    s = TableSpec(1.0)
    one = place_vertices(s, Pose(gamma, 1.0, 0.0), Flat()).vertices
    two = place_vertices(s, Pose(gamma + math.pi / 2, 1.0, 0.0), Flat()).vertices
    # A->B->C->D: the turned table's A sits where B was
    np.testing.assert_allclose(two, np.roll(one, -1, axis=0), atol=1e-12)


def test_incline():
    assert incline([1, 0, 0], [-1, 0, 0]) == 0.0
    g = Plane(0.5, 0.0)
    t = 2 / math.sqrt(5)
    A = [t, 0, g(t, 0)]
    C = [-t, 0, g(-t, 0)]
    assert incline(A, C) == pytest.approx(math.asin(1 / math.sqrt(5)))
    assert incline(A, C) == pytest.approx(0.46365, abs=1e-5)
    h = math.sqrt(2) / 2
    assert incline([h, 0, h], [-h, 0, -h]) == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        incline([0.5, 0, 0], [-0.5, 0, 0])


def test_segment_slope():
    assert segment_slope([0, 0, 0], [1, 0, 1]) == 1.0
    assert segment_slope([0, 0, 0], [1, 1, 1]) == pytest.approx(0.7071068, abs=1e-7)
    assert segment_slope([0, 0, 0], [0, 0, 2]) == math.inf
    assert segment_slope([1, 2, 3], [0, 2, 1]) == segment_slope([0, 2, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        segment_slope([1, 1, 1], [1, 1, 1])


def test_slope_vectorized():
    s = slope(np.array([[1, 0, -1], [0, 0, 1], [3, 4, 0]]))
    np.testing.assert_array_equal(s, [1.0, math.inf, 0.0])


def test_top_corners():
    spec = TableSpec(1.0, 0.5)
    table = place_vertices(spec, Pose(0.0, 1.0, 0.0), Flat())
    A2, *_ = top_corners(table, spec)
    np.testing.assert_allclose(A2, table.A + [0, 0, 0.5], atol=1e-15)
    zero = top_corners(table, TableSpec(1.0))
    np.testing.assert_array_equal(zero[0], table.A)
    upright = place_vertices(spec, Pose(0.0, 1.0, -math.pi / 2), Flat())
    with pytest.raises(ValueError, match="vertical"):
        top_corners(upright, spec)


def test_up_normal_orientation():
    table = PlacedTable.from_frame([0, 0, 0], [1, 0, 0], [0, 1, 0], math.pi / 2)
    flipped = PlacedTable(table.A, table.B, table.C, table.D, table.u, table.e2, -table.n)
    np.testing.assert_array_equal(up_normal(flipped), [0, 0, 1])
