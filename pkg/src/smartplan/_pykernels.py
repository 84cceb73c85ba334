"""Pure-Python edge feasibility kernels.

Mirror of ``_ckernels.pyx``; the two must produce bit-identical answers.
"""
import math

import numpy as np

BACKEND = "python"

# lattice-line slack in cell units; keeps the cover conservative under rounding
SNAP = 1e-9


def seg_disc(ax, ay, bx, by, cx, cy, r):
    """True iff the closed segment a-b comes within ``r`` of (cx, cy)."""
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    px = ax
    py = ay
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


def _v_at(u, ua, va, ub, vb):
    if u == ua:
        return va
    if u == ub:
        return vb
    return va + (u - ua) * (vb - va) / (ub - ua)


class EdgeChecker:
    """Segment feasibility against an occupancy grid and a set of discs.

    ``occupancy`` is a C-contiguous uint8 array indexed ``[row, col]`` with
    row 0 at the bottom of the workspace.
    """

    def __init__(self, occupancy, ox, oy, cell_size):
        occ = np.ascontiguousarray(occupancy, dtype=np.uint8)
        self.rows, self.cols = occ.shape
        self._occ = occ.tolist()
        self.ox = float(ox)
        self.oy = float(oy)
        self.cs = float(cell_size)
        self._discs = []
        self.calls = 0

    def set_discs(self, discs):
        self._discs = [(float(x), float(y), float(r)) for x, y, r in discs]

    @property
    def discs(self):
        return list(self._discs)

    def touched_cells(self, ax, ay, bx, by):
        """Every (col, row) whose closed square meets the segment."""
        out = []
        self._walk(ax, ay, bx, by, out)
        return out

    def static_blocked(self, ax, ay, bx, by):
        return self._walk(ax, ay, bx, by, None)

    def _walk(self, ax, ay, bx, by, out):
        cs = self.cs
        ua = (ax - self.ox) / cs
        va = (ay - self.oy) / cs
        ub = (bx - self.ox) / cs
        vb = (by - self.oy) / cs
        if ua > ub:
            ua, ub = ub, ua
            va, vb = vb, va
        c0 = max(math.ceil(ua - SNAP) - 1, 0)
        c1 = min(math.floor(ub + SNAP), self.cols - 1)
        occ = self._occ
        last_row = self.rows - 1
        for i in range(c0, c1 + 1):
            lo = ua if ua > i else float(i)
            hi = ub if ub < i + 1 else float(i + 1)
            if ua == ub:
                v1 = va
                v2 = vb
            else:
                v1 = _v_at(lo, ua, va, ub, vb)
                v2 = _v_at(hi, ua, va, ub, vb)
            if v1 > v2:
                v1, v2 = v2, v1
            r0 = max(math.ceil(v1 - SNAP) - 1, 0)
            r1 = min(math.floor(v2 + SNAP), last_row)
            for j in range(r0, r1 + 1):
                if out is not None:
                    out.append((i, j))
                elif occ[j][i]:
                    return True
        return False

    def disc_blocked(self, ax, ay, bx, by):
        for cx, cy, r in self._discs:
            if seg_disc(ax, ay, bx, by, cx, cy, r):
                return True
        return False

    def in_discs(self, x, y):
        for cx, cy, r in self._discs:
            ex = x - cx
            ey = y - cy
            if ex * ex + ey * ey <= r * r:
                return True
        return False

    def free(self, ax, ay, bx, by):
        self.calls += 1
        if self.disc_blocked(ax, ay, bx, by):
            return False
        return not self.static_blocked(ax, ay, bx, by)
