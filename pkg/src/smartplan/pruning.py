"""Risk zones around the robot and obstacles, path validation and local pruning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .geometry import Disc, Point2
from .kernels import seg_disc


@dataclass(frozen=True)
class ObstacleState:
    id: int
    position: Point2
    speed: float
    radius: float

    def __post_init__(self):
        if self.speed < 0 or self.radius <= 0:
            raise ValueError("obstacle speed must be >= 0 and radius > 0")


@dataclass(frozen=True)
class RiskModel:
    lrz: Disc
    ohz: tuple  # ((obstacle id, Disc), ...) for every obstacle
    cpr: tuple  # Discs of the dangerous obstacles
    danger_ids: frozenset
    exempt_ids: frozenset = field(default=frozenset())

    def with_danger(self, ids) -> "RiskModel":
        """Copy whose critical region also covers the hazard zones of ``ids``."""
        ids = frozenset(ids) | self.danger_ids
        cpr = tuple(d for i, d in self.ohz if i in ids)
        return replace(self, cpr=cpr, danger_ids=ids)


def compute_risk(cobot_pos, cobot_speed, obstacles, T_RH, T_OH, r_R, r_min=0.0) -> RiskModel:
    """Reaction zone, hazard zones and the critical pruning region.

    A hazard zone that already contains the robot is replaced by the bare
    obstacle footprint (radius r_i + r_R) for this instant.
    """
    if T_RH <= 0 or T_OH < 0:
        raise ValueError("T_RH must be > 0 and T_OH >= 0")
    cx, cy = cobot_pos
    lrz = Disc(Point2(cx, cy), max(cobot_speed * T_RH, r_min))
    ohz = []
    danger = set()
    exempt = set()
    cpr = []
    for o in obstacles:
        ox, oy = o.position
        r = o.speed * T_OH + o.radius + r_R
        d = math.hypot(ox - cx, oy - cy)
        if d <= r:
            exempt.add(o.id)
            r = o.radius + r_R
        disc = Disc(Point2(ox, oy), r)
        ohz.append((o.id, disc))
        if d <= r + lrz.radius:
            danger.add(o.id)
            cpr.append(disc)
    return RiskModel(lrz, tuple(ohz), tuple(cpr), frozenset(danger), frozenset(exempt))


def _in_disc(x, y, d):
    ex = x - d.center[0]
    ey = y - d.center[1]
    return ex * ex + ey * ey <= d.radius * d.radius


def path_violations(points, risk: RiskModel):
    """First offending path element and the obstacles that invalidate the path.

    Returns ``(index, ids)``: ``index`` is the cobot-side point of the first
    bad node or edge (None if the path is valid).
    """
    lrz = risk.lrz
    inside = [_in_disc(x, y, lrz) for x, y in points]
    first = None
    ids = set()
    for i, (x, y) in enumerate(points):
        if not inside[i]:
            continue
        for oid, d in risk.ohz:
            if _in_disc(x, y, d):
                ids.add(oid)
                if first is None or i < first:
                    first = i
    for i in range(len(points) - 1):
        if not (inside[i] or inside[i + 1]):
            continue
        ax, ay = points[i]
        bx, by = points[i + 1]
        for oid, d in risk.ohz:
            if seg_disc(ax, ay, bx, by, d.center[0], d.center[1], d.radius):
                ids.add(oid)
                if first is None or i < first:
                    first = i
    return first, ids


def validate_points(points, risk: RiskModel) -> bool:
    return path_violations(points, risk)[0] is None


def validate_path(path, forest, risk: RiskModel, cobot_pos=None) -> bool:
    """Check the part of a node path that lies in the reaction zone.

    ``path`` lists node ids, robot side first; ``cobot_pos`` (optional) is
    prepended as the start of the first edge.
    """
    pts = [] if cobot_pos is None else [tuple(cobot_pos)]
    nodes = forest.nodes
    pts.extend((nodes[i].x, nodes[i].y) for i in path)
    return validate_points(pts, risk)


@dataclass
class PruneReport:
    roots: list
    pruned: list
    cut_edges: list  # (child, former parent) for edge-only cuts
    touched: int  # node visits, the |N_W| instrumentation counter
    cover: int  # cells overlapping the critical region's bounding boxes


def cpr_cover(tiling, discs) -> set:
    cover = set()
    for d in discs:
        cx, cy = d.center
        r = d.radius
        cover.update(tiling.cells_in_box(cx - r, cy - r, cx + r, cy + r))
    return cover


def prune(forest, risk: RiskModel) -> PruneReport:
    """Prune every node and edge of ``forest`` that meets the critical region.

    Only nodes registered in cells covering the region (plus a one-cell rim
    for edges) are visited.  Starts a new labelling epoch.
    """
    f = forest
    f.new_epoch()
    discs = risk.cpr
    nodes = f.nodes
    reg = f.registry
    t = f.tiling
    cover = cpr_cover(t, discs)
    rim = set()
    for c in cover:
        rim.update(t.block3(c))
    touched = 0
    pruned = []
    roots = set()
    for c in sorted(cover):
        for nid in sorted(reg[c]):
            touched += 1
            if nid == f.goal_root:
                continue  # the goal stays; its blocked edges are cut below
            n = nodes[nid]
            for d in discs:
                if _in_disc(n.x, n.y, d):
                    roots.update(n.children)
                    f.deactivate(nid)
                    pruned.append(nid)
                    break
    cut = []
    for c in sorted(rim):
        for nid in sorted(reg[c]):
            touched += 1
            n = nodes[nid]
            if n.parent is None:
                continue
            p = nodes[n.parent]
            for d in discs:
                if seg_disc(n.x, n.y, p.x, p.y, d.center[0], d.center[1], d.radius):
                    cut.append((nid, n.parent))
                    f.unlink(nid)
                    roots.add(nid)
                    break
    f.work += touched
    out = [f.goal_root] + sorted(r for r in roots if nodes[r].active and r != f.goal_root)
    return PruneReport(out, pruned, cut, touched, len(cover))
