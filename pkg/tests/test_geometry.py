import math

from hypothesis import given, strategies as st

from smartplan.geometry import (
    Disc, Point2, Segment2, closest_point_on_segment, distance, discs_intersect,
    point_in_disc, segment_intersects_disc, segment_point_distance,
)
from oracles import seg_dist

coord = st.floats(-50, 50, allow_nan=False, allow_subnormal=False)


def test_distance_examples():
    assert distance(Point2(0, 0), Point2(3, 4)) == 5.0
    assert distance(Point2(2, 2), Point2(2, 2)) == 0.0
    assert distance(Point2(-1, 0), Point2(1, 0)) == 2.0


@given(coord, coord, coord, coord, coord, coord)
def test_distance_triangle_and_symmetry(ax, ay, bx, by, cx, cy):
    a, b, c = Point2(ax, ay), Point2(bx, by), Point2(cx, cy)
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


def test_segment_disc_examples():
    s = Segment2(Point2(0, 0), Point2(4, 0))
    assert segment_intersects_disc(s, Disc(Point2(2, 1), 1))  # tangent
    assert not segment_intersects_disc(s, Disc(Point2(2, 2), 1))
    assert segment_intersects_disc(Segment2(Point2(0, 0), Point2(0, 0)), Disc(Point2(0.5, 0), 1))


def test_point_in_disc_examples():
    assert point_in_disc(Point2(1, 0), Disc(Point2(0, 0), 1))
    assert not point_in_disc(Point2(1.0001, 0), Disc(Point2(0, 0), 1))
    assert point_in_disc(Point2(3.3, -7), Disc(Point2(3.3, -7), 0))


@given(coord, coord, coord, coord, coord, coord)
def test_segment_point_distance_matches_shapely(ax, ay, bx, by, cx, cy):
    s = Segment2(Point2(ax, ay), Point2(bx, by))
    assert math.isclose(segment_point_distance(s, Point2(cx, cy)), seg_dist(ax, ay, bx, by, cx, cy),
                        rel_tol=1e-9, abs_tol=1e-9)


@given(coord, coord, coord, coord, coord, coord, st.floats(0, 20))
def test_segment_disc_matches_sampling(ax, ay, bx, by, cx, cy, r):
    # dense sampling plus the analytic closest point, compared away from tangency
    n = 10_000
    best = min(math.hypot(ax + (bx - ax) * i / n - cx, ay + (by - ay) * i / n - cy) for i in range(0, n + 1, 97))
    qx, qy = closest_point_on_segment(ax, ay, bx, by, cx, cy)
    best = min(best, math.hypot(qx - cx, qy - cy))
    d = Disc(Point2(cx, cy), r)
    got = segment_intersects_disc(Segment2(Point2(ax, ay), Point2(bx, by)), d)
    if abs(best - r) > 1e-9:
        assert got == (best <= r)


@given(coord, coord, st.floats(0, 10), coord, coord, st.floats(0, 10))
def test_discs_intersect_inclusive(ax, ay, ra, bx, by, rb):
    d = math.hypot(ax - bx, ay - by)
    got = discs_intersect(Disc(Point2(ax, ay), ra), Disc(Point2(bx, by), rb))
    if abs(d - (ra + rb)) > 1e-9:
        assert got == (d <= ra + rb)
