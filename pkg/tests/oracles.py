"""Independent reference implementations used as test oracles.

Nothing here calls into the package's geometry or kernels: shapely answers
the geometric questions, networkx the shortest-path ones.
"""
import math
import random

import networkx as nx
from shapely.geometry import LineString, Point, box

from smartplan.geometry import Disc, Point2
from smartplan.world import StaticMap, Tiling


def seg_dist(ax, ay, bx, by, cx, cy):
    if math.hypot(bx - ax, by - ay) < 1e-12:  # shapely degrades on near-zero lengths
        return Point(ax, ay).distance(Point(cx, cy))
    return LineString([(ax, ay), (bx, by)]).distance(Point(cx, cy))


def touched_cells(ax, ay, bx, by, rows, cols, cs=1.0, ox=0.0, oy=0.0):
    """Cells whose closed squares meet the closed segment."""
    geom = Point(ax, ay) if (ax, ay) == (bx, by) else LineString([(ax, ay), (bx, by)])
    out = set()
    for r in range(rows):
        for c in range(cols):
            sq = box(ox + c * cs, oy + r * cs, ox + (c + 1) * cs, oy + (r + 1) * cs)
            if sq.intersects(geom):
                out.add((c, r))
    return out


class Feasible:
    """Edge feasibility from first principles (closed cells, closed discs)."""

    def __init__(self, occupied, discs, cs=1.0):
        self.occ = occupied
        self.discs = list(discs)
        self.cs = cs
        self.rows, self.cols = occupied.shape
        self._cache = {}

    def __call__(self, a, b):
        key = (a, b) if a <= b else (b, a)
        ok = self._cache.get(key)
        if ok is None:
            ok = self._eval(*a, *b)
            self._cache[key] = ok
        return ok

    def _eval(self, ax, ay, bx, by):
        for (cx, cy), r in self.discs:
            if seg_dist(ax, ay, bx, by, cx, cy) <= r:
                return False
        if not self.occ.any():
            return True
        geom = Point(ax, ay) if (ax, ay) == (bx, by) else LineString([(ax, ay), (bx, by)])
        c0 = max(int(math.floor(min(ax, bx) / self.cs)) - 1, 0)
        c1 = min(int(math.floor(max(ax, bx) / self.cs)) + 1, self.cols - 1)
        r0 = max(int(math.floor(min(ay, by) / self.cs)) - 1, 0)
        r1 = min(int(math.floor(max(ay, by) / self.cs)) + 1, self.rows - 1)
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                if self.occ[r, c]:
                    sq = box(c * self.cs, r * self.cs, (c + 1) * self.cs, (r + 1) * self.cs)
                    if sq.intersects(geom):
                        return False
        return True


def cell_rc(x, y, rows, cols, cs=1.0):
    c = min(max(int(math.floor(x / cs)), 0), cols - 1)
    r = min(max(int(math.floor(y / cs)), 0), rows - 1)
    return c, r


def adjacent(p, q, rows, cols, cs=1.0):
    cp, rp = cell_rc(*p, rows, cols, cs)
    cq, rq = cell_rc(*q, rows, cols, cs)
    return abs(cp - cq) <= 1 and abs(rp - rq) <= 1


def neighbor_graph(points, feasible, rows, cols, cs=1.0):
    """Weighted graph on ``points`` (id -> (x, y)) with 3x3-cell feasible edges."""
    g = nx.Graph()
    g.add_nodes_from(points)
    ids = sorted(points)
    for i, a in enumerate(ids):
        pa = points[a]
        for b in ids[i + 1:]:
            pb = points[b]
            if adjacent(pa, pb, rows, cols, cs) and feasible(pa, pb):
                g.add_edge(a, b, weight=math.hypot(pa[0] - pb[0], pa[1] - pb[1]))
    return g


def tree_root(forest, nid):
    nodes = forest.nodes
    seen = 0
    while nodes[nid].parent is not None:
        nid = nodes[nid].parent
        seen += 1
        assert seen <= len(nodes), "cycle"
    return nid


def tree_cost(forest, nid):
    """Edge lengths summed from the goal end of the parent chain."""
    nodes = forest.nodes
    chain = [nid]
    while nodes[chain[-1]].parent is not None:
        chain.append(nodes[chain[-1]].parent)
    g = 0.0
    for a, b in zip(reversed(chain[1:]), reversed(chain[:-1])):
        na, nb = nodes[a], nodes[b]
        g = g + math.hypot(nb.x - na.x, nb.y - na.y)
    return g


class UnionFind:
    def __init__(self):
        self.p = {}

    def find(self, a):
        self.p.setdefault(a, a)
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[max(ra, rb)] = min(ra, rb)


def components(forest):
    """Partition of active nodes by union-find over the surviving edges."""
    uf = UnionFind()
    for n in forest.nodes:
        if n.active:
            uf.find(n.id)
            if n.parent is not None:
                uf.union(n.id, n.parent)
    groups = {}
    for n in forest.nodes:
        if n.active:
            groups.setdefault(uf.find(n.id), set()).add(n.id)
    return sorted(map(frozenset, groups.values()), key=min)


def brute_hotspots(forest, region, feasible):
    """Hot-spot map from the definition: cell c is hot iff an alive node in c
    and an alive node in c or an 8-adjacent region cell lie in different
    subtrees and can be joined by a feasible straight edge."""
    t = forest.tiling
    rows, cols = t.rows, t.cols
    nodes = forest.nodes
    by_cell = {}
    for n in nodes:
        if n.active:
            by_cell.setdefault(cell_rc(n.x, n.y, rows, cols, t.cell_size), []).append(n.id)
    root = {n.id: tree_root(forest, n.id) for n in nodes if n.active}
    out = {}
    for flat in region:
        c, r = flat % cols, flat // cols
        mine = by_cell.get((c, r), [])
        others = []
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                cc, rr = c + dc, r + dr
                if 0 <= cc < cols and 0 <= rr < rows and rr * cols + cc in region:
                    others.extend(by_cell.get((cc, rr), []))
        hot = any(root[a] != root[b] and feasible((nodes[a].x, nodes[a].y), (nodes[b].x, nodes[b].y))
                  for a in mine for b in others if a != b)
        out[flat] = 1 if hot else -1
    return out


def random_map(rng: random.Random, n=8, p_occ=0.1, cs=1.0) -> StaticMap:
    import numpy as np

    occ = np.array([[1 if rng.random() < p_occ else 0 for _ in range(n)] for _ in range(n)], dtype=np.uint8)
    return StaticMap(Tiling(n * cs, n * cs, cs), occ)


def random_free_point(rng: random.Random, m: StaticMap, avoid=()):
    t = m.tiling
    for _ in range(10_000):
        p = (rng.uniform(0, t.width), rng.uniform(0, t.height))
        if m.point_free(p) and all(math.hypot(p[0] - d.center[0], p[1] - d.center[1]) > d.radius for d in avoid):
            return Point2(*p)
    return None


def random_discs(rng: random.Random, m: StaticMap, k, rmin=0.5, rmax=2.0):
    t = m.tiling
    return [Disc(Point2(rng.uniform(0, t.width), rng.uniform(0, t.height)), rng.uniform(rmin, rmax))
            for _ in range(k)]
