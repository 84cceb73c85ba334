"""Goal-rooted search forest over a tiled workspace.

A ``Forest`` holds one tree after construction and several disjoint subtrees
after pruning.  Every edge joins nodes in 8-adjacent (or identical) cells, so
the 3x3 cell block around a node holds all of its possible tree neighbors.

Subtree membership is tracked with lazily assigned labels: a label written in
an older epoch is stale, and ``label_of`` recomputes it by walking parents.
Merges between labelled subtrees are recorded as label aliases.
"""
from __future__ import annotations

import heapq
import logging
import math
import random

from .geometry import Point2

log = logging.getLogger(__name__)

INF = math.inf


class Node:
    __slots__ = ("id", "x", "y", "cell", "parent", "children", "label", "epoch", "active", "cost")

    def __init__(self, nid, x, y, cell):
        self.id = nid
        self.x = x
        self.y = y
        self.cell = cell
        self.parent = None
        self.children = set()
        self.label = -1
        self.epoch = -1
        self.active = True
        self.cost = INF

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)

    @property
    def status(self) -> str:
        return "active" if self.active else "pruned"

    def copy(self) -> "Node":
        n = Node(self.id, self.x, self.y, self.cell)
        n.parent = self.parent
        n.children = set(self.children)
        n.label = self.label
        n.epoch = self.epoch
        n.active = self.active
        n.cost = self.cost
        return n

    def __repr__(self):
        return f"Node({self.id}, ({self.x:.3f}, {self.y:.3f}), parent={self.parent}, cost={self.cost:.3f})"


class Forest:
    def __init__(self, tiling, goal):
        self.tiling = tiling
        self.nodes: list[Node] = []
        self.registry: list[set[int]] = [set() for _ in range(tiling.n_cells)]
        self.pruned: set[int] = set()
        self.roots: set[int] = set()  # active non-goal nodes without a parent
        self.epoch = 0
        self._alias: dict[int, int] = {}
        self._next_label = 1
        self.work = 0
        self.warnings: list[str] = []
        self.goal_root = self.add_node(goal[0], goal[1])
        root = self.nodes[self.goal_root]
        root.cost = 0.0
        root.label = 0
        root.epoch = self.epoch
        self.roots.discard(self.goal_root)

    # -- structure ---------------------------------------------------------

    def __len__(self):
        return len(self.nodes)

    def add_node(self, x, y, parent=None) -> int:
        nid = len(self.nodes)
        n = Node(nid, float(x), float(y), self.tiling.cell_id(x, y))
        self.nodes.append(n)
        self.registry[n.cell].add(nid)
        if parent is None:
            self.roots.add(nid)
        else:
            self.link(nid, parent)
            p = self.nodes[parent]
            n.cost = p.cost + math.hypot(n.x - p.x, n.y - p.y)
            n.label = p.label
            n.epoch = p.epoch
        return nid

    def link(self, child, parent):
        """Attach a parentless ``child`` under ``parent`` (costs untouched)."""
        c = self.nodes[child]
        assert c.parent is None, "link requires a detached child"
        c.parent = parent
        self.nodes[parent].children.add(child)
        self.roots.discard(child)

    def unlink(self, child):
        c = self.nodes[child]
        if c.parent is not None:
            self.nodes[c.parent].children.discard(child)
            c.parent = None
        if c.active and child != self.goal_root:
            self.roots.add(child)

    def set_parent(self, child, parent):
        c = self.nodes[child]
        if c.parent == parent:
            return
        if c.parent is not None:
            self.nodes[c.parent].children.discard(child)
        c.parent = parent
        self.nodes[parent].children.add(child)
        self.roots.discard(child)

    def deactivate(self, nid):
        """Mark ``nid`` pruned: drop all its edges and its registry entry."""
        n = self.nodes[nid]
        self.unlink(nid)
        for ch in sorted(n.children):
            self.unlink(ch)
        n.active = False
        self.registry[n.cell].discard(nid)
        self.roots.discard(nid)
        self.pruned.add(nid)

    def reactivate(self, nid):
        n = self.nodes[nid]
        n.active = True
        self.registry[n.cell].add(nid)
        self.pruned.discard(nid)
        self.roots.add(nid)

    def reroot(self, nid):
        """Reverse parent links from ``nid`` up to its subtree root."""
        nodes = self.nodes
        prev = None
        cur = nid
        while cur is not None:
            nxt = nodes[cur].parent
            if nxt is not None:
                nodes[nxt].children.discard(cur)
            nodes[cur].parent = prev
            if prev is not None:
                nodes[prev].children.add(cur)
                self.roots.discard(cur)
            prev = cur
            cur = nxt
        self.roots.add(nid)

    def subtree(self, nid) -> list[int]:
        out = [nid]
        nodes = self.nodes
        i = 0
        while i < len(out):
            out.extend(sorted(nodes[out[i]].children))
            i += 1
        return out

    def update_subtree(self, nid):
        """Recompute cost-to-go below ``nid`` (whose cost is set) and label it 0."""
        nodes = self.nodes
        epoch = self.epoch
        stack = [nid]
        n = nodes[nid]
        n.label = 0
        n.epoch = epoch
        while stack:
            u = nodes[stack.pop()]
            for c in u.children:
                cn = nodes[c]
                cn.cost = u.cost + math.hypot(cn.x - u.x, cn.y - u.y)
                cn.label = 0
                cn.epoch = epoch
                stack.append(c)
            self.work += 1

    def path_to_goal(self, nid) -> list[int]:
        out = [nid]
        nodes = self.nodes
        while nodes[out[-1]].parent is not None:
            out.append(nodes[out[-1]].parent)
            if len(out) > len(nodes):
                raise RuntimeError("parent cycle detected")
        return out

    def active_ids(self):
        return (n.id for n in self.nodes if n.active)

    # -- labels ------------------------------------------------------------

    def new_epoch(self):
        self.epoch += 1
        self._alias.clear()
        self._next_label = 1
        g = self.nodes[self.goal_root]
        g.label = 0
        g.epoch = self.epoch

    def _find(self, lab):
        alias = self._alias
        root = lab
        while root in alias:
            root = alias[root]
        while lab != root:
            nxt = alias[lab]
            alias[lab] = root
            lab = nxt
        return root

    def merge_labels(self, absorbed, into):
        a = self._find(absorbed)
        b = self._find(into)
        if a == b:
            return
        if a == 0:  # label 0 always names the goal subtree
            a, b = b, a
        self._alias[a] = b

    def label_of(self, nid) -> int:
        """Subtree label of an active node, backtracking towards its root if stale."""
        nodes = self.nodes
        epoch = self.epoch
        n = nodes[nid]
        if n.epoch == epoch:
            return self._find(n.label)
        chain = []
        cur = nid
        while True:
            n = nodes[cur]
            if n.epoch == epoch:
                lab = self._find(n.label)
                break
            chain.append(cur)
            if n.parent is None:
                if cur == self.goal_root:
                    lab = 0
                else:
                    lab = self._next_label
                    self._next_label += 1
                break
            cur = n.parent
        for m in chain:
            nodes[m].label = lab
            nodes[m].epoch = epoch
        self.work += len(chain)
        return lab

    def label_all_zero(self):
        """Mark every active node reachable from the goal as labelled 0."""
        for nid in self.subtree(self.goal_root):
            self.nodes[nid].label = 0
            self.nodes[nid].epoch = self.epoch

    # -- spatial queries ---------------------------------------------------

    def neighbor_ids(self, x, y) -> list[int]:
        reg = self.registry
        out = []
        for c in self.tiling.block3(self.tiling.cell_id(x, y)):
            out.extend(reg[c])
        return out

    def nearest(self, x, y, accept=None):
        """Nearest active node (optionally passing ``accept``), by ring search."""
        t = self.tiling
        cs = t.cell_size
        flat = t.cell_id(x, y)
        col = flat % t.cols
        row = flat // t.cols
        reg = self.registry
        nodes = self.nodes
        best = None
        bd = INF
        for k in range(max(t.cols, t.rows) + 1):
            if best is not None and bd <= (k - 1) * cs:
                break
            for c in _ring(col, row, k, t.cols, t.rows):
                for nid in reg[c]:
                    n = nodes[nid]
                    d = math.hypot(n.x - x, n.y - y)
                    if d < bd or (d == bd and nid < best):
                        if accept is None or accept(nid):
                            best = nid
                            bd = d
        return best, bd

    def copy(self) -> "Forest":
        f = Forest.__new__(Forest)
        f.tiling = self.tiling
        f.nodes = [n.copy() for n in self.nodes]
        f.registry = [set(s) for s in self.registry]
        f.pruned = set(self.pruned)
        f.roots = set(self.roots)
        f.epoch = self.epoch
        f._alias = dict(self._alias)
        f._next_label = self._next_label
        f.work = self.work
        f.warnings = list(self.warnings)
        f.goal_root = self.goal_root
        return f


def _ring(col, row, k, cols, rows):
    if k == 0:
        if 0 <= col < cols and 0 <= row < rows:
            yield row * cols + col
        return
    for c in range(col - k, col + k + 1):
        if 0 <= c < cols:
            if row - k >= 0:
                yield (row - k) * cols + c
            if row + k < rows:
                yield (row + k) * cols + c
    for r in range(row - k + 1, row + k):
        if 0 <= r < rows:
            if col - k >= 0:
                yield r * cols + col - k
            if col + k < cols:
                yield r * cols + col + k


def neighbors(f: Forest, p) -> set[int]:
    return set(f.neighbor_ids(p[0], p[1]))


# -- construction -------------------------------------------------------------


def _propagate(f: Forest, nid):
    nodes = f.nodes
    stack = [nid]
    while stack:
        u = nodes[stack.pop()]
        for c in u.children:
            cn = nodes[c]
            cn.cost = u.cost + math.hypot(cn.x - u.x, cn.y - u.y)
            stack.append(c)


def _extend(f: Forest, checker, sx, sy, step):
    """One RRT* iteration towards (sx, sy) with the 3x3-cell neighbor rule."""
    near, d = f.nearest(sx, sy)
    if near is None or d == 0.0:
        return None
    nodes = f.nodes
    nn = nodes[near]
    if d > step:
        sx = nn.x + (sx - nn.x) * step / d
        sy = nn.y + (sy - nn.y) * step / d
    if not checker.free(nn.x, nn.y, sx, sy):
        return None
    best = near
    best_cost = nn.cost + math.hypot(sx - nn.x, sy - nn.y)
    near_ids = sorted(f.neighbor_ids(sx, sy))
    for m in near_ids:
        mn = nodes[m]
        c = mn.cost + math.hypot(sx - mn.x, sy - mn.y)
        if c < best_cost and checker.free(mn.x, mn.y, sx, sy):
            best = m
            best_cost = c
    new = f.add_node(sx, sy, best)
    nn = nodes[new]
    for m in near_ids:
        if m == best:
            continue
        mn = nodes[m]
        c = nn.cost + math.hypot(sx - mn.x, sy - mn.y)
        if c < mn.cost and checker.free(sx, sy, mn.x, mn.y):
            f.set_parent(m, new)
            mn.cost = c
            _propagate(f, m)
    return new


def build_initial_tree(m, goal, n_samples, step=None, rng_seed=0, checker=None,
                       coverage_attempts=20, optimize=True) -> Forest:
    """RRT* tree rooted at ``goal`` over the static map ``m``.

    After ``n_samples`` iterations every uncovered free cell gets up to
    ``coverage_attempts`` extensions towards uniform samples inside it.  With
    ``optimize`` the finished tree is turned into an exact shortest-path tree
    over the 3x3-cell neighbor graph.
    """
    t = m.tiling
    if step is None:
        step = t.cell_size
    if not 0 < step <= t.cell_size:
        raise ValueError("step must lie in (0, cell_size] so edges stay within 3x3 blocks")
    if not m.point_free(goal):
        raise ValueError(f"goal {tuple(goal)} is not in a free cell")
    if checker is None:
        checker = m.checker()
    rng = random.Random(rng_seed)
    f = Forest(t, goal)
    occ = m.occupied
    ox, oy = t.origin
    for _ in range(n_samples):
        x = ox + rng.random() * t.width
        y = oy + rng.random() * t.height
        c = t.cell_id(x, y)
        if occ[c // t.cols, c % t.cols]:
            continue
        _extend(f, checker, x, y, step)

    cs = t.cell_size
    uncovered = [c for c in m.free_cells() if not f.registry[c]]
    progress = True
    while uncovered and progress:
        progress = False
        for c in uncovered:
            x0 = ox + (c % t.cols) * cs
            y0 = oy + (c // t.cols) * cs
            for _ in range(coverage_attempts):
                _extend(f, checker, x0 + rng.random() * cs, y0 + rng.random() * cs, step)
                if f.registry[c]:
                    progress = True
                    break
        uncovered = [c for c in uncovered if not f.registry[c]]
    for c in uncovered:
        msg = f"free cell {tuple(t.index(c))} left without a node"
        f.warnings.append(msg)
        log.warning(msg)

    f.label_all_zero()
    if optimize:
        rewire_cascade(f, checker, f.subtree(f.goal_root), expand=False)
    return f


# -- optimisation ---------------------------------------------------------------


def _best_parent(f: Forest, checker, nid):
    """Cheapest feasible label-0 neighbor for ``nid`` (strict improvement only)."""
    nodes = f.nodes
    n = nodes[nid]
    best = None
    best_cost = n.cost
    for m in sorted(f.neighbor_ids(n.x, n.y)):
        if m == nid:
            continue
        mn = nodes[m]
        c = mn.cost + math.hypot(n.x - mn.x, n.y - mn.y)
        f.work += 1
        if c < best_cost and f.label_of(m) == 0 and checker.free(mn.x, mn.y, n.x, n.y):
            best = m
            best_cost = c
    return best, best_cost


def rewire_cascade(f: Forest, checker, seeds, expand=True):
    """Priority-ordered rewiring of the goal subtree starting from ``seeds``.

    With ``expand`` every node below a seed is also pulled towards its best
    neighbor first, which is what makes the result exact when the rest of the
    goal subtree was already a shortest-path tree.  Returns the number of
    reparented nodes.
    """
    nodes = f.nodes
    if expand:
        start = []
        seen = set()
        for s in sorted(seeds):
            if s in seen:
                continue
            for v in f.subtree(s):
                if v not in seen:
                    seen.add(v)
                    start.append(v)
    else:
        start = sorted(set(seeds))
    changed = 0
    heap = []
    for v in start:
        n = nodes[v]
        if not n.active or n.cost == INF:
            continue
        if v != f.goal_root and expand:
            best, c = _best_parent(f, checker, v)
            if best is not None:
                f.set_parent(v, best)
                n.cost = c
                changed += 1
        heap.append((n.cost, v))
    heapq.heapify(heap)
    goal = f.goal_root
    tiling = f.tiling
    reg = f.registry
    while heap:
        c, u = heapq.heappop(heap)
        un = nodes[u]
        if c > un.cost or not un.active:
            continue
        ux = un.x
        uy = un.y
        for cell in tiling.block3(un.cell):
            for v in reg[cell]:
                if v == u or v == goal:
                    continue
                vn = nodes[v]
                nc = c + math.hypot(vn.x - ux, vn.y - uy)
                f.work += 1
                if nc < vn.cost:
                    if vn.parent == u:
                        vn.cost = nc
                        heapq.heappush(heap, (nc, v))
                    elif f.label_of(v) == 0 and checker.free(ux, uy, vn.x, vn.y):
                        f.set_parent(v, u)
                        vn.cost = nc
                        changed += 1
                        heapq.heappush(heap, (nc, v))
    return changed


def reintegrate(f: Forest, checker):
    """Re-attach pruned nodes and leftover subtree roots to the goal subtree.

    Each candidate joins the feasible label-0 neighbor giving it the lowest
    cost-to-go; candidates without one stay pruned or detached.  Passes repeat
    while they make progress.  Returns the attached node ids.
    """
    nodes = f.nodes
    attached = []
    progress = True
    while progress:
        progress = False
        for p in sorted(f.pruned):
            n = nodes[p]
            best = _cheapest_goal_neighbor(f, checker, n.x, n.y, exclude=p)
            if best is None:
                continue
            f.reactivate(p)
            f.link(p, best)
            b = nodes[best]
            n.cost = b.cost + math.hypot(n.x - b.x, n.y - b.y)
            n.label = 0
            n.epoch = f.epoch
            attached.append(p)
            progress = True
        for r in sorted(f.roots):
            n = nodes[r]
            if n.parent is not None or not n.active or f.label_of(r) == 0:
                continue
            best = _cheapest_goal_neighbor(f, checker, n.x, n.y, exclude=r)
            if best is None:
                continue
            f.link(r, best)
            b = nodes[best]
            n.cost = b.cost + math.hypot(n.x - b.x, n.y - b.y)
            f.merge_labels(f.label_of(r), 0)
            f.update_subtree(r)
            attached.append(r)
            progress = True
    return attached


def _cheapest_goal_neighbor(f: Forest, checker, x, y, exclude=None):
    nodes = f.nodes
    best = None
    best_cost = INF
    for m in sorted(f.neighbor_ids(x, y)):
        if m == exclude:
            continue
        mn = nodes[m]
        c = mn.cost + math.hypot(x - mn.x, y - mn.y)
        f.work += 1
        if c < best_cost and f.label_of(m) == 0 and checker.free(mn.x, mn.y, x, y):
            best = m
            best_cost = c
    return best


# -- diagnostics ----------------------------------------------------------------


def check_forest(f: Forest, tol=1e-9) -> list[str]:
    """Brute-force audit of every structural invariant; returns the violations."""
    problems = []
    nodes = f.nodes
    t = f.tiling
    for n in nodes:
        if n.parent is not None:
            p = nodes[n.parent]
            if n.id not in p.children:
                problems.append(f"{n.id}: parent {n.parent} does not list it as child")
            if not (n.active and p.active):
                problems.append(f"{n.id}: edge touches a pruned node")
            cn = t.cell_id(n.x, n.y)
            cp = t.cell_id(p.x, p.y)
            if abs(cn % t.cols - cp % t.cols) > 1 or abs(cn // t.cols - cp // t.cols) > 1:
                problems.append(f"{n.id}: edge to {n.parent} leaves the 3x3 block")
        for c in n.children:
            if nodes[c].parent != n.id:
                problems.append(f"{n.id}: child {c} points elsewhere")
        if not n.active and (n.parent is not None or n.children):
            problems.append(f"{n.id}: pruned node has edges")
        if (not n.active) != (n.id in f.pruned):
            problems.append(f"{n.id}: pruned set mismatch")
        if n.cell != t.cell_id(n.x, n.y):
            problems.append(f"{n.id}: stale cell index")
    registry = [set() for _ in range(t.n_cells)]
    for n in nodes:
        if n.active:
            registry[n.cell].add(n.id)
    if registry != f.registry:
        problems.append("cell registry differs from recomputation")
    # acyclicity and goal reachability
    state = {}
    for n in nodes:
        if not n.active:
            continue
        chain = []
        cur = n.id
        while cur is not None and cur not in state:
            if cur in chain:
                problems.append(f"cycle through {cur}")
                break
            chain.append(cur)
            cur = nodes[cur].parent
        root = state[cur] if cur in state else (chain[-1] if chain else None)
        for c in chain:
            state[c] = root
    for n in nodes:
        if not n.active:
            continue
        root = state.get(n.id)
        if n.parent is None and n.id != f.goal_root and n.id not in f.roots:
            problems.append(f"{n.id}: detached node missing from roots")
        if root == f.goal_root:
            if n.id == f.goal_root:
                if n.cost != 0.0:
                    problems.append("goal root cost is not 0")
            else:
                p = nodes[n.parent]
                want = p.cost + math.hypot(n.x - p.x, n.y - p.y)
                if abs(n.cost - want) > tol:
                    problems.append(f"{n.id}: cost {n.cost} != {want}")
            if n.epoch == f.epoch and f._find(n.label) != 0:
                problems.append(f"{n.id}: in goal subtree but labelled {n.label}")
        elif n.epoch == f.epoch and f._find(n.label) == 0:
            problems.append(f"{n.id}: labelled 0 but detached from goal")
    for r in f.roots:
        if nodes[r].parent is not None or not nodes[r].active:
            problems.append(f"{r}: listed as root but attached or pruned")
    return problems
