# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled edge feasibility kernels; see _pykernels.py for the reference."""
from libc.math cimport ceil, floor

import numpy as np

BACKEND = "cython"

# lattice-line slack in cell units; keeps the cover conservative under rounding
cdef double SNAP = 1e-9


cdef inline bint _seg_disc(double ax, double ay, double bx, double by,
                           double cx, double cy, double r) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double den = dx * dx + dy * dy
    cdef double px = ax
    cdef double py = ay
    cdef double t, ex, ey
    if den > 0.0:
        t = ((cx - ax) * dx + (cy - ay) * dy) / den
        if t >= 1.0:
            px = bx
            py = by
        elif t > 0.0:
            px = ax + t * dx
            py = ay + t * dy
    ex = cx - px
    ey = cy - py
    return ex * ex + ey * ey <= r * r


def seg_disc(double ax, double ay, double bx, double by,
             double cx, double cy, double r):
    return _seg_disc(ax, ay, bx, by, cx, cy, r)


cdef inline double _v_at(double u, double ua, double va, double ub, double vb) nogil:
    if u == ua:
        return va
    if u == ub:
        return vb
    return va + (u - ua) * (vb - va) / (ub - ua)


cdef class EdgeChecker:
    cdef const unsigned char[:, ::1] _occ
    cdef double[:, ::1] _disc_arr
    cdef Py_ssize_t _ndiscs
    cdef public int rows, cols
    cdef public double ox, oy, cs
    cdef public long calls

    def __init__(self, occupancy, ox, oy, cell_size):
        occ = np.ascontiguousarray(occupancy, dtype=np.uint8)
        self._occ = occ
        self.rows = occ.shape[0]
        self.cols = occ.shape[1]
        self.ox = ox
        self.oy = oy
        self.cs = cell_size
        self.calls = 0
        self.set_discs(())

    def set_discs(self, discs):
        arr = np.asarray([(float(x), float(y), float(r)) for x, y, r in discs],
                         dtype=np.float64).reshape(-1, 3)
        self._disc_arr = np.ascontiguousarray(arr)
        self._ndiscs = arr.shape[0]

    @property
    def discs(self):
        return [tuple(row) for row in np.asarray(self._disc_arr).tolist()]

    cdef bint _walk(self, double ax, double ay, double bx, double by, list out):
        cdef double cs = self.cs
        cdef double ua = (ax - self.ox) / cs
        cdef double va = (ay - self.oy) / cs
        cdef double ub = (bx - self.ox) / cs
        cdef double vb = (by - self.oy) / cs
        cdef double tmp, lo, hi, v1, v2
        cdef Py_ssize_t i, j, c0, c1, r0, r1
        if ua > ub:
            tmp = ua; ua = ub; ub = tmp
            tmp = va; va = vb; vb = tmp
        c0 = <Py_ssize_t>ceil(ua - SNAP) - 1
        if c0 < 0:
            c0 = 0
        c1 = <Py_ssize_t>floor(ub + SNAP)
        if c1 > self.cols - 1:
            c1 = self.cols - 1
        for i in range(c0, c1 + 1):
            lo = ua if ua > i else <double>i
            hi = ub if ub < i + 1 else <double>(i + 1)
            if ua == ub:
                v1 = va
                v2 = vb
            else:
                v1 = _v_at(lo, ua, va, ub, vb)
                v2 = _v_at(hi, ua, va, ub, vb)
            if v1 > v2:
                tmp = v1; v1 = v2; v2 = tmp
            r0 = <Py_ssize_t>ceil(v1 - SNAP) - 1
            if r0 < 0:
                r0 = 0
            r1 = <Py_ssize_t>floor(v2 + SNAP)
            if r1 > self.rows - 1:
                r1 = self.rows - 1
            for j in range(r0, r1 + 1):
                if out is not None:
                    out.append((i, j))
                elif self._occ[j, i]:
                    return True
        return False

    def touched_cells(self, double ax, double ay, double bx, double by):
        out = []
        self._walk(ax, ay, bx, by, out)
        return out

    def static_blocked(self, double ax, double ay, double bx, double by):
        return self._walk(ax, ay, bx, by, None)

    cdef inline bint _disc_blocked(self, double ax, double ay, double bx, double by):
        cdef Py_ssize_t k
        for k in range(self._ndiscs):
            if _seg_disc(ax, ay, bx, by, self._disc_arr[k, 0],
                         self._disc_arr[k, 1], self._disc_arr[k, 2]):
                return True
        return False

    def disc_blocked(self, double ax, double ay, double bx, double by):
        return self._disc_blocked(ax, ay, bx, by)

    def in_discs(self, double x, double y):
        cdef Py_ssize_t k
        cdef double ex, ey, r
        for k in range(self._ndiscs):
            ex = x - self._disc_arr[k, 0]
            ey = y - self._disc_arr[k, 1]
            r = self._disc_arr[k, 2]
            if ex * ex + ey * ey <= r * r:
                return True
        return False

    def free(self, double ax, double ay, double bx, double by):
        self.calls += 1
        if self._disc_blocked(ax, ay, bx, by):
            return False
        return not self._walk(ax, ay, bx, by, None)
