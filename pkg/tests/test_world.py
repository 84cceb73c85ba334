import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smartplan.geometry import Point2, Segment2
from smartplan.world import (
    CellIndex, MapFormatError, StaticMap, Tiling, cell_of, format_map, load_map, neighborhood,
    parse_map, segment_blocked_static,
)

T32 = Tiling(32, 32, 1.0)


def test_tiling_shape():
    t = Tiling(10.5, 4, 1.0)
    assert (t.cols, t.rows) == (11, 4)
    assert t.n_cells == 44


def test_cell_of_examples():
    assert cell_of(T32, Point2(3.5, 4.2)) == CellIndex(3, 4)
    assert cell_of(T32, Point2(32, 32)) == CellIndex(31, 31)
    assert cell_of(T32, Point2(0, 0)) == CellIndex(0, 0)
    with pytest.raises(ValueError):
        cell_of(T32, Point2(-0.1, 3))


def test_cell_of_random_points_inside_their_cell():
    rng = random.Random(0)
    t = Tiling(13.0, 7.0, 0.7, Point2(-2.0, 1.5))
    for _ in range(100_000):
        x = rng.uniform(-2.0, 11.0)
        y = rng.uniform(1.5, 8.5)
        c = cell_of(t, Point2(x, y))
        x0 = -2.0 + c.col * 0.7
        y0 = 1.5 + c.row * 0.7
        assert x0 <= x + 1e-12 and (x < x0 + 0.7 or c.col == t.cols - 1)
        assert y0 <= y + 1e-12 and (y < y0 + 0.7 or c.row == t.rows - 1)


def test_neighborhood_examples():
    assert len(neighborhood(T32, CellIndex(5, 5), 3)) == 9
    assert len(neighborhood(T32, CellIndex(0, 0), 3)) == 4
    assert neighborhood(T32, CellIndex(7, 9), 1) == {CellIndex(7, 9)}
    for bad in (0, 2, -1):
        with pytest.raises(ValueError):
            neighborhood(T32, CellIndex(1, 1), bad)


@given(st.integers(0, 31), st.integers(0, 31), st.integers(0, 20))
def test_neighborhood_nested_and_bounded(col, row, k):
    l = 2 * k + 1
    a = neighborhood(T32, CellIndex(col, row), l)
    b = neighborhood(T32, CellIndex(col, row), l + 2)
    assert a <= b
    assert len(a) <= l * l
    assert all(abs(c.col - col) <= k and abs(c.row - row) <= k for c in a)


def test_segment_blocked_static_examples():
    m = StaticMap.empty(5, 5)
    assert not segment_blocked_static(m, Segment2(Point2(0, 0), Point2(5, 5)))
    occ = np.zeros((5, 5), np.uint8)
    occ[2, 2] = 1
    m = StaticMap(Tiling(5, 5, 1.0), occ)
    assert segment_blocked_static(m, Segment2(Point2(0, 2.5), Point2(5, 2.5)))
    assert not segment_blocked_static(m, Segment2(Point2(0, 0.5), Point2(5, 0.5)))


def test_parse_map_roundtrip_and_orientation():
    text = "4 3 1\n#...\n....\n...#\n"
    m = parse_map(text)
    assert m.is_occupied(0)  # first grid line is the bottom row
    assert m.is_occupied(2 * 4 + 3)
    assert not m.point_free((0.5, 0.5))
    assert format_map(m) == text


@pytest.mark.parametrize("text,line,col", [
    ("", 1, None),
    ("4 3\n", 1, 1),
    ("4 3 x\n....\n....\n....\n", 1, 1),
    ("4 3 1\n....\n...\n....\n", 3, 1),
    ("4 3 1\n....\n..x.\n....\n", 3, 3),
    ("4 3 1\n....\n....\n", 3, None),
])
def test_parse_map_errors_carry_position(text, line, col):
    with pytest.raises(MapFormatError) as ei:
        parse_map(text)
    assert ei.value.line == line
    assert ei.value.column == col


def test_load_map(tmp_path):
    p = tmp_path / "m.map"
    p.write_text("2 2 1\n.#\n..\n")
    assert load_map(p).is_occupied(1)


def test_inflated_matches_distance_rule():
    occ = np.zeros((9, 9), np.uint8)
    occ[4, 4] = 1
    m = StaticMap(Tiling(9, 9, 1.0), occ).inflated(0.5)
    # cells within 0.5 m of the occupied square: its 8 neighbours
    assert m.occupied.sum() == 9
    m2 = StaticMap(Tiling(9, 9, 1.0), occ).inflated(1.2)
    for r in range(9):
        for c in range(9):
            gap = math.hypot(max(abs(c - 4) - 1, 0), max(abs(r - 4) - 1, 0))
            assert bool(m2.occupied[r, c]) == (gap < 1.2)


def test_free_cells_and_checker_backend(backend):
    occ = np.zeros((3, 3), np.uint8)
    occ[1, 1] = 1
    m = StaticMap(Tiling(3, 3, 1.0), occ)
    assert m.free_cells() == [0, 1, 2, 3, 5, 6, 7, 8]
    ch = m.checker(backend=backend)
    assert not ch.free(0.5, 1.5, 2.5, 1.5)
    assert ch.free(0.5, 0.5, 2.5, 0.5)
