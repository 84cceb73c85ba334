import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smartplan import kernels
from smartplan import _pykernels
from shapely.geometry import LineString, Point, box

from oracles import seg_dist, touched_cells

grid_coord = st.one_of(st.floats(-0.5, 8.5, allow_nan=False), st.integers(0, 8).map(float),
                       st.integers(0, 16).map(lambda v: v / 2))


def _occ(seed, n=8, p=0.25):
    return (np.random.default_rng(seed).random((n, n)) < p).astype(np.uint8)


@given(grid_coord, grid_coord, grid_coord, grid_coord)
def test_touched_cells_cover_closed_square_oracle(ax, ay, bx, by):
    ch = _pykernels.EdgeChecker(np.zeros((8, 8), np.uint8), 0.0, 0.0, 1.0)
    got = set(ch.touched_cells(ax, ay, bx, by))
    want = touched_cells(ax, ay, bx, by, 8, 8)
    assert want <= got
    # extras only from the lattice snap (1e-9 cells) plus rounding; intersects
    # rather than distance, which underflows on coordinates near 1e-183
    seg = Point(ax, ay) if (ax, ay) == (bx, by) else LineString([(ax, ay), (bx, by)])
    e = 1e-8
    for c, r in got - want:
        assert box(c - e, r - e, c + 1 + e, r + 1 + e).intersects(seg)


@given(st.floats(-10, 10, allow_subnormal=False), st.floats(-10, 10, allow_subnormal=False), st.floats(-10, 10, allow_subnormal=False), st.floats(-10, 10, allow_subnormal=False),
       st.floats(-10, 10, allow_subnormal=False), st.floats(-10, 10, allow_subnormal=False), st.floats(0, 5, allow_subnormal=False))
def test_seg_disc_matches_shapely(ax, ay, bx, by, cx, cy, r):
    d = seg_dist(ax, ay, bx, by, cx, cy)
    if abs(d - r) > 1e-9:
        for b in kernels.available():
            assert kernels.get_backend(b).seg_disc(ax, ay, bx, by, cx, cy, r) == (d <= r)


@pytest.mark.skipif(len(kernels.available()) < 2, reason="compiled backend not built")
@given(st.integers(0, 50), st.lists(st.tuples(grid_coord, grid_coord, grid_coord, grid_coord), min_size=1, max_size=30),
       st.lists(st.tuples(st.floats(0, 8), st.floats(0, 8), st.floats(0, 2)), max_size=3))
def test_backends_bit_identical(seed, segs, discs):
    occ = _occ(seed)
    a = kernels.get_backend("python").EdgeChecker(occ, 0.0, 0.0, 1.0)
    b = kernels.get_backend("cython").EdgeChecker(occ, 0.0, 0.0, 1.0)
    a.set_discs(discs)
    b.set_discs(discs)
    for s in segs:
        assert a.touched_cells(*s) == b.touched_cells(*s)
        assert a.static_blocked(*s) == b.static_blocked(*s)
        assert a.disc_blocked(*s) == b.disc_blocked(*s)
        assert a.free(*s) == b.free(*s)
        assert a.in_discs(s[0], s[1]) == b.in_discs(s[0], s[1])
    assert a.calls == b.calls


def test_free_counts_calls(backend):
    ch = kernels.get_backend(backend).EdgeChecker(np.zeros((4, 4), np.uint8), 0.0, 0.0, 1.0)
    for _ in range(5):
        ch.free(0.5, 0.5, 3.5, 3.5)
    assert ch.calls == 5


def test_static_blocked_sampling_agreement(backend):
    rng = random.Random(3)
    occ = _occ(7)
    ch = kernels.get_backend(backend).EdgeChecker(occ, 0.0, 0.0, 1.0)
    for _ in range(300):
        ax, ay, bx, by = (rng.uniform(0, 8) for _ in range(4))
        sampled = False
        for i in range(10_001):
            t = i / 10_000
            x, y = ax + (bx - ax) * t, ay + (by - ay) * t
            c, r = min(int(x), 7), min(int(y), 7)
            if occ[r, c]:
                sampled = True
                break
        if sampled:
            assert ch.static_blocked(ax, ay, bx, by)


def test_non_unit_cells_and_origin(backend):
    occ = np.zeros((4, 6), np.uint8)
    occ[2, 3] = 1
    ch = kernels.get_backend(backend).EdgeChecker(occ, -1.0, 2.0, 0.5)
    # occupied cell spans x in [0.5, 1.0], y in [3.0, 3.5]
    assert ch.static_blocked(-1.0, 3.25, 2.0, 3.25)
    assert not ch.static_blocked(-1.0, 2.25, 2.0, 2.25)
    assert ch.static_blocked(0.0, 2.5, 0.5, 3.0)  # corner touch counts
