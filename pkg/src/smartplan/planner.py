"""Tick-wise replanning loop around a persistent goal-rooted forest."""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

from .geometry import Point2
from .pruning import PruneReport, RiskModel, compute_risk, path_violations, prune
from .repair import find_entry, repair
from .tree import Forest, build_initial_tree, reintegrate, rewire_cascade


@dataclass
class PlannerConfig:
    T_RH: float = 0.8
    T_OH: float = 0.4
    r_R: float = 0.5
    v_R: float = 4.0
    cell_size: float = 1.0
    l_max: int | None = None  # None: smallest window covering the tiling
    connect_radius: float | None = None  # None: 1.5 cells
    rrt_samples: int = 2000
    seed: int = 0
    r_min: float | None = None  # None: one cell
    step: float | None = None  # None: one cell
    fallback_cap: int = 2000
    backend: str | None = None

    def __post_init__(self):
        for name in ("T_RH", "r_R", "v_R", "cell_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.T_OH < 0:
            raise ValueError("T_OH must be >= 0")
        if self.l_max is not None and (self.l_max < 3 or self.l_max % 2 == 0):
            raise ValueError("l_max must be an odd integer >= 3")
        if self.rrt_samples < 0 or self.fallback_cap < 0:
            raise ValueError("sample counts must be >= 0")

    @property
    def radius(self) -> float:
        return self.connect_radius if self.connect_radius is not None else 1.5 * self.cell_size

    @property
    def min_lrz(self) -> float:
        return self.r_min if self.r_min is not None else self.cell_size


@dataclass
class Trajectory:
    waypoints: list
    segment_times: list
    start_time: float = 0.0
    node_ids: list = field(default_factory=list)  # None where a waypoint is not a tree node

    @classmethod
    def from_points(cls, points, speed, start_time=0.0, node_ids=None):
        pts = [Point2(float(x), float(y)) for x, y in points]
        times = [math.hypot(b.x - a.x, b.y - a.y) / speed for a, b in zip(pts, pts[1:])]
        ids = list(node_ids) if node_ids is not None else [None] * len(pts)
        return cls(pts, times, start_time, ids)

    @property
    def length(self) -> float:
        return sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(self.waypoints, self.waypoints[1:]))

    @property
    def duration(self) -> float:
        return sum(self.segment_times)

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


@dataclass
class TickOutcome:
    kind: str  # "kept" | "replanned" | "failed"
    trajectory: Trajectory | None = None
    wall_time: float = 0.0  # seconds spent in prune + repair + optimise + path search
    ops: int = 0  # work units over the same span
    l_final: int = 0
    risk: RiskModel | None = None
    prune: PruneReport | None = None
    reattached: int = 0


class Planner:
    """Owns the forest and answers one validation/replanning request per tick."""

    def __init__(self, static_map, goal, cfg: PlannerConfig, forest: Forest | None = None):
        if not static_map.point_free(goal):
            raise ValueError(f"goal {tuple(goal)} is not in a free cell")
        self.map = static_map
        self.goal = Point2(*goal)
        self.cfg = cfg
        self.checker = static_map.checker(backend=cfg.backend)
        if forest is None:
            forest = build_initial_tree(static_map, self.goal, cfg.rrt_samples, cfg.step,
                                        cfg.seed, checker=self.checker)
        self.forest = forest
        self.rng = random.Random(cfg.seed)

    def ops(self) -> int:
        return self.forest.work + self.checker.calls

    def _path_from(self, pos, entry, now):
        f = self.forest
        ids = f.path_to_goal(entry)
        pts = [tuple(pos)] + [(f.nodes[i].x, f.nodes[i].y) for i in ids]
        return Trajectory.from_points(pts, self.cfg.v_R, now, [None] + ids)

    def plan_initial(self, start, now=0.0) -> Trajectory:
        if not self.map.point_free(start):
            raise ValueError(f"start {tuple(start)} is not in a free cell")
        if math.hypot(start[0] - self.goal.x, start[1] - self.goal.y) == 0.0:
            return Trajectory.from_points([self.goal], self.cfg.v_R, now, [self.forest.goal_root])
        self.checker.set_discs(())
        entry = find_entry(self.forest, start, self.cfg.radius, self.checker)
        if entry is None:
            f = self.forest
            sx, sy = start

            def ok(nid):
                n = f.nodes[nid]
                return f.label_of(nid) == 0 and self.checker.free(sx, sy, n.x, n.y)

            entry, _ = f.nearest(sx, sy, accept=ok)
        if entry is None:
            raise ValueError("start isolated: no tree node reachable by a feasible edge")
        return self._path_from(start, entry, now)

    def tick(self, position, speed, obstacles, trajectory, next_index=1, now=0.0) -> TickOutcome:
        """Validate the remaining trajectory and replan when it is blocked.

        ``trajectory.waypoints[next_index:]`` is the part still ahead of the
        robot; ``trajectory`` may be None after a failed tick.
        """
        cfg = self.cfg
        pos = (float(position[0]), float(position[1]))
        risk = compute_risk(pos, speed, obstacles, cfg.T_RH, cfg.T_OH, cfg.r_R, cfg.min_lrz)
        ahead = []
        ahead_ids = []
        if trajectory is not None:
            ahead = [tuple(w) for w in trajectory.waypoints[next_index:]]
            ahead_ids = trajectory.node_ids[next_index:]
            first, ids = path_violations([pos] + ahead, risk)
            if first is None:
                return TickOutcome("kept", trajectory, risk=risk)
            risk = risk.with_danger(ids)
        else:
            first = 0

        f = self.forest
        t0 = time.perf_counter()
        ops0 = self.ops()
        self.checker.set_discs([(d.center[0], d.center[1], d.radius) for d in risk.cpr])
        if self.checker.in_discs(self.goal.x, self.goal.y):
            # no path can end inside the critical region; leave the tree alone
            return TickOutcome("failed", None, time.perf_counter() - t0, self.ops() - ops0,
                               0, risk, None)
        if risk.cpr:
            report = prune(f, risk)
        else:
            f.new_epoch()
            report = PruneReport([f.goal_root], [], [], 0, 0)
        n_hat = self._lsr_center(pos, ahead, ahead_ids, first)
        res = repair(f, pos, self.goal, n_hat, self.checker, free_map=self.map,
                     l_max=cfg.l_max, rng=self.rng, connect_radius=cfg.radius,
                     fallback_cap=cfg.fallback_cap)
        traj = None
        if res.success:
            rewire_cascade(f, self.checker, res.seeds)
            entry = find_entry(f, pos, cfg.radius, self.checker)
            traj = self._path_from(pos, entry, now)
        wall = time.perf_counter() - t0
        ops = self.ops() - ops0
        attached = reintegrate(f, self.checker)
        if attached:
            rewire_cascade(f, self.checker, attached)
        kind = "replanned" if res.success else "failed"
        return TickOutcome(kind, traj, wall, ops, res.l_final, risk, report, len(attached))

    def _lsr_center(self, pos, ahead, ahead_ids, first):
        f = self.forest
        t = f.tiling
        best = None
        bd = math.inf
        for nid in ahead_ids:
            if nid is None or f.nodes[nid].active:
                continue
            n = f.nodes[nid]
            d = math.hypot(n.x - pos[0], n.y - pos[1])
            if d < bd:
                best = nid
                bd = d
        if best is not None:
            return f.nodes[best].cell
        pts = [pos] + ahead
        x, y = pts[min(first, len(pts) - 1)]
        return t.cell_id(x, y)


def plan_initial(static_map, start, goal, cfg: PlannerConfig):
    """Build the initial tree and the first trajectory; returns (forest, trajectory)."""
    p = Planner(static_map, goal, cfg)
    return p.forest, p.plan_initial(start)
