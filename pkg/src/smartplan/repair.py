"""Informed tree repair: merge disjoint subtrees at hot-spot cells.

A cell is a hot-spot when one of its alive nodes and a node of a different
subtree in the same cell or an 8-adjacent cell (both inside the current
search window) can be joined by a feasible straight edge.  The window grows
by two cells per side until the goal subtree is reachable from the robot or
the whole tiling has been searched; after that, random free-space samples
are used to bridge subtrees.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .tree import INF

log = logging.getLogger(__name__)

UTILITY_FLOOR = 1e-9


@dataclass
class RepairState:
    center_cell: int
    l: int
    l_max: int
    region: set = field(default_factory=set)
    hotspot_map: dict = field(default_factory=dict)  # flat cell -> 1 | -1
    utilities: dict = field(default_factory=dict)  # flat cell -> utility, hot cells only
    connected_seeds: set = field(default_factory=set)


@dataclass
class RepairResult:
    success: bool
    seeds: set
    entry: int | None
    l_final: int
    connections: list  # (parent, child) per merge
    fallback_samples: int = 0


def label_subtrees(forest, region) -> int:
    """Label every alive node in ``region``; returns the number of distinct labels."""
    labels = set()
    reg = forest.registry
    for c in region:
        for nid in reg[c]:
            labels.add(forest.label_of(nid))
    return len(labels)


class _Feasibility:
    """Memoised edge feasibility for one repair episode."""

    def __init__(self, forest, checker):
        self.nodes = forest.nodes
        self.checker = checker
        self.cache = {}

    def __call__(self, a, b):
        key = (a, b) if a < b else (b, a)
        ok = self.cache.get(key)
        if ok is None:
            na = self.nodes[a]
            nb = self.nodes[b]
            ok = self.checker.free(na.x, na.y, nb.x, nb.y)
            self.cache[key] = ok
        return ok


def _candidates(forest, c, region):
    reg = forest.registry
    out = []
    for cc in forest.tiling.block3(c):
        if cc in region:
            out.extend(reg[cc])
    out.sort()
    return out


def _cell_is_hot(forest, c, region, feasible) -> bool:
    members = sorted(forest.registry[c])
    if not members:
        return False
    cand = _candidates(forest, c, region)
    label_of = forest.label_of
    for a in members:
        la = label_of(a)
        for b in cand:
            if b != a and label_of(b) != la and feasible(a, b):
                return True
    return False


def find_hotspots(forest, region, checker, feasible=None) -> dict:
    """Hot-spot map over ``region``: flat cell id -> 1 (hot-spot) or -1."""
    if feasible is None:
        feasible = _Feasibility(forest, checker)
    return {c: (1 if _cell_is_hot(forest, c, region, feasible) else -1) for c in sorted(region)}


def utility(c, cobot_pos, goal, forest) -> float:
    """Inverse of (robot-to-centroid distance + cost-to-go estimate) for cell ``c``.

    The cost-to-go term is the smallest cost-to-go among goal-subtree nodes
    in the cell, or the centroid-to-goal distance when there are none.
    """
    pc = forest.tiling.centroid(c)
    come = math.hypot(cobot_pos[0] - pc.x, cobot_pos[1] - pc.y)
    best = INF
    nodes = forest.nodes
    for nid in forest.registry[c]:
        if forest.label_of(nid) == 0 and nodes[nid].cost < best:
            best = nodes[nid].cost
    go = best if best < INF else math.hypot(pc.x - goal[0], pc.y - goal[1])
    return 1.0 / max(come + go, UTILITY_FLOOR)


def find_entry(forest, cobot_pos, radius, checker):
    """Goal-subtree node reachable from the robot by a feasible straight edge
    within ``radius``, minimising edge length plus cost-to-go."""
    x, y = cobot_pos
    nodes = forest.nodes
    reg = forest.registry
    best = None
    best_total = INF
    for c in forest.tiling.cells_in_box(x - radius, y - radius, x + radius, y + radius):
        for nid in reg[c]:
            n = nodes[nid]
            d = math.hypot(n.x - x, n.y - y)
            if d > radius or n.cost == INF:
                continue
            total = d + n.cost
            if total > best_total or (total == best_total and nid > best):
                continue
            if forest.label_of(nid) == 0 and checker.free(x, y, n.x, n.y):
                best = nid
                best_total = total
    return best


def full_window(tiling, center) -> int:
    col = center % tiling.cols
    row = center // tiling.cols
    half = max(col, tiling.cols - 1 - col, row, tiling.rows - 1 - row)
    return max(2 * half + 1, 3)


class _Episode:
    def __init__(self, forest, cobot_pos, goal, checker, connect_radius, observer):
        self.f = forest
        self.cobot = cobot_pos
        self.goal = goal
        self.checker = checker
        self.radius = connect_radius
        self.observer = observer
        self.feasible = _Feasibility(forest, checker)
        self.seeds = set()
        self.connections = []
        self.cells_by_label = {}
        self.state = None

    def entry(self):
        return find_entry(self.f, self.cobot, self.radius, self.checker)

    def _index_labels(self, cells):
        f = self.f
        by = self.cells_by_label
        for c in cells:
            for nid in f.registry[c]:
                by.setdefault(f.label_of(nid), set()).add(c)

    def connect(self, a, b):
        f = self.f
        nodes = f.nodes
        la = f.label_of(a)
        lb = f.label_of(b)
        if la == 0:
            parent, child = a, b
        elif lb == 0:
            parent, child = b, a
        else:
            ua = utility(nodes[a].cell, self.cobot, self.goal, f)
            ub = utility(nodes[b].cell, self.cobot, self.goal, f)
            if ua > ub or (ua == ub and a < b):
                parent, child = a, b
            else:
                parent, child = b, a
        lp = f.label_of(parent)
        lc = f.label_of(child)
        f.reroot(child)
        f.link(child, parent)
        f.merge_labels(lc, lp)
        if lp == 0:
            p = nodes[parent]
            ch = nodes[child]
            ch.cost = p.cost + math.hypot(ch.x - p.x, ch.y - p.y)
            f.update_subtree(child)
            self.seeds.add(child)
        self.connections.append((parent, child))
        moved = self.cells_by_label.pop(lc, set())
        self.cells_by_label.setdefault(f.label_of(parent), set()).update(moved)
        return moved

    def refresh(self, moved):
        st = self.state
        f = self.f
        affected = set()
        for c in moved:
            affected.update(f.tiling.block3(c))
        for c in sorted(affected & st.region):
            if st.hotspot_map.get(c) != 1:
                continue
            if _cell_is_hot(f, c, st.region, self.feasible):
                st.utilities[c] = utility(c, self.cobot, self.goal, f)
            else:
                st.hotspot_map[c] = -1
                st.utilities.pop(c, None)

    def search(self, l):
        """Hot-spot search and reconnection inside the l x l window.

        On entry every cell of the previous window is known to be cold, so
        only the new ring and the old border (whose 3x3 blocks gained cells)
        need a scan.
        """
        f = self.f
        st = self.state
        old = st.region
        st.l = l
        st.region = set(f.tiling.block(st.center_cell, (l - 1) // 2))
        added = st.region - old
        label_subtrees(f, added)
        self._index_labels(added)
        todo = set(added)
        for c in added:
            todo.update(cc for cc in f.tiling.block3(c) if cc in old)
        for c in sorted(todo):
            if _cell_is_hot(f, c, st.region, self.feasible):
                st.hotspot_map[c] = 1
                st.utilities[c] = utility(c, self.cobot, self.goal, f)
            else:
                st.hotspot_map[c] = -1
        label_of = f.label_of
        while st.utilities:
            c = max(st.utilities, key=lambda k: (st.utilities[k], -k))
            cand = _candidates(f, c, st.region)
            for a in sorted(f.registry[c]):
                for b in cand:
                    if b == a or label_of(a) == label_of(b) or not self.feasible(a, b):
                        continue
                    moved = self.connect(a, b)
                    self.refresh(moved)
                    st.connected_seeds = set(self.seeds)
                    if self.observer is not None:
                        self.observer(st, self.connections[-1])
                    entry = self.entry()
                    if entry is not None:
                        return entry
            if st.hotspot_map.get(c) == 1:
                if _cell_is_hot(f, c, st.region, self.feasible):
                    raise RuntimeError(f"cell {c} still hot after exhausting its pairs")
                st.hotspot_map[c] = -1
                st.utilities.pop(c, None)
        return None

    def sample(self, rng, free_map):
        """Join one random free sample to every subtree it can see."""
        f = self.f
        t = f.tiling
        x = t.origin.x + rng.random() * t.width
        y = t.origin.y + rng.random() * t.height
        if not free_map.point_free((x, y)) or self.checker.in_discs(x, y):
            return
        nodes = f.nodes
        best = {}
        for m in sorted(f.neighbor_ids(x, y)):
            mn = nodes[m]
            d = math.hypot(mn.x - x, mn.y - y)
            if d == 0.0:
                return
            lab = f.label_of(m)
            score = mn.cost + d if lab == 0 else d
            if lab in best and best[lab][0] <= score:
                continue
            if self.checker.free(x, y, mn.x, mn.y):
                best[lab] = (score, m)
        if not best:
            nid = f.add_node(x, y)
            f.label_of(nid)
            return
        if 0 in best:
            host_label = 0
        else:
            host_label = min(best, key=lambda k: (best[k][0], best[k][1]))
        host = best.pop(host_label)[1]
        new = f.add_node(x, y, host)
        nn = nodes[new]
        nn.label = host_label
        nn.epoch = f.epoch
        if host_label == 0:
            self.seeds.add(new)
        for lab in sorted(best):
            q = best[lab][1]
            f.reroot(q)
            f.link(q, new)
            f.merge_labels(lab, host_label)
            if host_label == 0:
                qn = nodes[q]
                qn.cost = nn.cost + math.hypot(qn.x - x, qn.y - y)
                f.update_subtree(q)
                self.seeds.add(q)
            self.connections.append((new, q))


def repair(forest, cobot_pos, goal, n_hat_cell, checker, free_map=None, l_max=None,
           rng=None, connect_radius=1.5, fallback_cap=2000, observer=None) -> RepairResult:
    """Reconnect the goal subtree to the robot after pruning.

    ``checker`` carries the static map and the critical region; ``free_map``
    (the static map) is only needed for the sampling fallback.  ``observer``
    is called as ``observer(state, (parent, child))`` after each merge.
    """
    f = forest
    ep = _Episode(f, cobot_pos, goal, checker, connect_radius, observer)
    if l_max is None:
        l_max = full_window(f.tiling, n_hat_cell)
    if l_max < 3 or l_max % 2 == 0:
        raise ValueError("l_max must be an odd integer >= 3")
    ep.state = RepairState(center_cell=n_hat_cell, l=1, l_max=l_max)
    entry = ep.entry()
    l = 1
    samples = 0
    while entry is None:
        if l < l_max:
            l += 2
            entry = ep.search(l)
        else:
            if free_map is None or rng is None or samples >= fallback_cap:
                break
            samples += 1
            ep.sample(rng, free_map)
            entry = ep.entry()
    if entry is None:
        log.debug("repair failed after window %d and %d samples", l, samples)
    return RepairResult(entry is not None, set(ep.seeds), entry, l, ep.connections, samples)
