"""Seeded discrete-time simulation of one robot among random-walk obstacles."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .geometry import Point2
from .planner import Planner, PlannerConfig
from .pruning import ObstacleState
from .tree import build_initial_tree
from .world import StaticMap, Tiling, load_map

# Deterministic replanning clock: base + per-work-unit microseconds, fitted
# to measured wall time with benchmarks/bench_kernels.py --calibrate.
REPLAN_BASE_US = 830.0
US_PER_OP = 1.05
MAX_REDRAWS = 50
CORRIDOR_ATTEMPTS = 100


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    range_bound: float = 0.03
    heading_bound: float = math.radians(1.0)
    localization_bound: float = 0.02

    def __post_init__(self):
        if min(self.range_bound, self.heading_bound, self.localization_bound) < 0:
            raise ValueError("noise bounds must be >= 0")


@dataclass
class ScenarioConfig:
    width: float = 32.0
    height: float = 32.0
    cell_size: float = 1.0
    map_path: str | None = None
    n_obstacles: int = 10
    obstacle_speeds: tuple = (2.0,)  # obstacle i gets speeds[i % len(speeds)]
    obstacle_radius: float = 0.5
    start: tuple = (2.0, 2.0)
    goal: tuple = (30.0, 30.0)
    cobot_speed: float = 4.0
    cobot_radius: float = 0.5
    noise: NoiseModel = field(default_factory=NoiseModel)
    dt: float = 0.05
    trials: int = 100
    seed: int = 0
    max_walk: float = 10.0
    corridor_half_width: float = 2.0
    timeout_factor: float = 10.0
    rrt_samples: int | None = None  # None: two per cell
    tree_seed: int = 0
    replan_clock: str = "ops"  # "ops" | "wall" | "ideal"
    replan_base_us: float = REPLAN_BASE_US
    us_per_op: float = US_PER_OP
    base_dir: str | None = field(default=None, repr=False)

    def __post_init__(self):
        self.obstacle_speeds = tuple(float(v) for v in self.obstacle_speeds)
        self.start = tuple(float(v) for v in self.start)
        self.goal = tuple(float(v) for v in self.goal)
        if isinstance(self.noise, dict):
            self.noise = NoiseModel(**self.noise)
        if not (self.width > 0 and self.height > 0 and self.cell_size > 0):
            raise ScenarioError("width, height and cell_size must be positive")
        if self.n_obstacles < 0:
            raise ScenarioError("n_obstacles must be >= 0")
        if self.n_obstacles and not self.obstacle_speeds:
            raise ScenarioError("obstacle_speeds must not be empty")
        if any(v < 0 for v in self.obstacle_speeds):
            raise ScenarioError("obstacle speeds must be >= 0")
        if self.obstacle_radius <= 0 or self.cobot_radius <= 0 or self.cobot_speed <= 0:
            raise ScenarioError("radii and cobot speed must be positive")
        if len(self.start) != 2 or len(self.goal) != 2:
            raise ScenarioError("start and goal must be [x, y] pairs")
        if self.dt <= 0:
            raise ScenarioError("dt must be positive")
        if self.trials < 1:
            raise ScenarioError("trials must be >= 1")
        if self.replan_clock not in ("ops", "wall", "ideal"):
            raise ScenarioError(f"unknown replan_clock {self.replan_clock!r}")

    @classmethod
    def from_dict(cls, d, base_dir=None):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ScenarioError(f"unknown scenario keys: {', '.join(extra)}")
        kw = dict(d)
        if base_dir is not None:
            kw.setdefault("base_dir", base_dir)
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from None

    @classmethod
    def load(cls, path):
        p = Path(path)
        try:
            text = p.read_text()
        except FileNotFoundError:
            raise FileNotFoundError(f"scenario not found: {path}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ScenarioError(f"{path}: top level must be an object")
        return cls.from_dict(d, base_dir=str(p.parent))

    def static_map(self) -> StaticMap:
        if self.map_path is None:
            return StaticMap(Tiling(self.width, self.height, self.cell_size))
        mp = Path(self.map_path)
        if not mp.is_absolute() and self.base_dir is not None:
            mp = Path(self.base_dir) / mp
        m = load_map(mp)
        t = m.tiling
        if (t.width, t.height, t.cell_size) != (self.width, self.height, self.cell_size):
            raise ScenarioError(f"map {mp} is {t.width}x{t.height}/{t.cell_size}, "
                                f"scenario says {self.width}x{self.height}/{self.cell_size}")
        return m

    def planning_map(self, m: StaticMap | None = None) -> StaticMap:
        """Static map with occupancy grown by the robot radius; the planner
        treats the robot as a point on it."""
        m = self.static_map() if m is None else m
        return m.inflated(self.cobot_radius) if m.occupied.any() else m

    def planner_config(self, backend=None) -> PlannerConfig:
        n = self.rrt_samples
        if n is None:
            n = 2 * math.ceil(self.width / self.cell_size) * math.ceil(self.height / self.cell_size)
        return PlannerConfig(r_R=self.cobot_radius, v_R=self.cobot_speed, cell_size=self.cell_size,
                             rrt_samples=n, seed=self.tree_seed, backend=backend)


@dataclass
class Walker:
    """Obstacle state plus its random-walk leg."""
    id: int
    x: float
    y: float
    speed: float
    radius: float
    heading: float = 0.0
    remaining: float = 0.0

    def state(self) -> ObstacleState:
        return ObstacleState(self.id, Point2(self.x, self.y), self.speed, self.radius)


@dataclass
class SimState:
    clock: float
    dt: float
    cobot: Point2
    speed: float
    waypoint_index: int
    obstacles: list
    trajectory: object = None


@dataclass
class TrialResult:
    seed: int
    success: bool
    travel_time: float | None
    replanning_times: list  # seconds charged to the clock, one per replan
    wall_times: list  # measured seconds, one per replan
    replan_count: int
    collision: bool
    timeout: bool = False
    failed_ticks: int = 0
    ticks: int = 0
    motion_time: float = 0.0


class _WalkArea:
    """Where an obstacle centre may travel: inside the workspace by its radius
    and off static occupancy."""

    def __init__(self, m: StaticMap, radius: float):
        t = m.tiling
        self.x0 = t.origin.x + radius
        self.y0 = t.origin.y + radius
        self.x1 = t.origin.x + t.width - radius
        self.y1 = t.origin.y + t.height - radius
        self.static = bool(m.occupied.any())
        self.checker = m.checker() if self.static else None
        self.radius = radius

    def leg_ok(self, x, y, hx, hy, dist) -> bool:
        ex = x + hx * dist
        ey = y + hy * dist
        if not (self.x0 <= ex <= self.x1 and self.y0 <= ey <= self.y1):
            return False
        if self.checker is None:
            return True
        self.checker.set_discs(())
        if self.checker.static_blocked(x, y, ex, ey):
            return False
        # footprint clearance at the far end of the leg against occupied cells
        return not _disc_hits_occupied(self.checker, ex, ey, self.radius)


def _disc_hits_occupied(checker, x, y, r) -> bool:
    for dx, dy in ((r, 0.0), (-r, 0.0), (0.0, r), (0.0, -r)):
        if checker.static_blocked(x, y, x + dx, y + dy):
            return True
    return False


def obstacle_step(w: Walker, area: _WalkArea, dt: float, rng: random.Random, max_walk=10.0) -> Walker:
    """Advance ``w`` by ``speed * dt`` along its random walk, drawing new legs
    as they run out.  A leg that would leave the walk area is redrawn up to
    MAX_REDRAWS times; after that the obstacle holds for the rest of the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    budget = w.speed * dt
    legs = 0
    while budget > 0.0:
        if w.remaining <= 0.0:
            if legs >= MAX_REDRAWS:
                break
            ok = False
            for _ in range(MAX_REDRAWS):
                h = rng.uniform(0.0, 2.0 * math.pi)
                d = rng.uniform(0.0, max_walk)
                if area.leg_ok(w.x, w.y, math.cos(h), math.sin(h), d):
                    ok = True
                    break
            legs += 1
            if not ok:
                break
            w.heading = h
            w.remaining = d
            continue
        m = min(budget, w.remaining)
        w.x += math.cos(w.heading) * m
        w.y += math.sin(w.heading) * m
        w.remaining -= m
        budget -= m
    return w


def perceive(cobot, walkers, noise: NoiseModel, rng: random.Random):
    """Noisy robot position and obstacle states.

    Obstacles are observed by range and bearing from the robot; both are
    perturbed and the result is placed relative to the perceived robot.
    """
    lb = noise.localization_bound
    px = cobot[0] + rng.uniform(-lb, lb)
    py = cobot[1] + rng.uniform(-lb, lb)
    out = []
    for w in walkers:
        dx = w.x - cobot[0]
        dy = w.y - cobot[1]
        rho = math.hypot(dx, dy) + rng.uniform(-noise.range_bound, noise.range_bound)
        th = math.atan2(dy, dx) + rng.uniform(-noise.heading_bound, noise.heading_bound)
        pos = Point2(px + rho * math.cos(th), py + rho * math.sin(th))
        out.append(ObstacleState(w.id, pos, w.speed, w.radius))
    return Point2(px, py), out


def _streams(seed: int, n: int):
    ss = np.random.SeedSequence(seed)
    kids = ss.spawn(n + 2)
    rngs = [random.Random(int(k.generate_state(1, dtype=np.uint64)[0])) for k in kids]
    return rngs[:n], rngs[n], rngs[n + 1]


def _spawn(sc: ScenarioConfig, m: StaticMap, rng: random.Random, i: int) -> Walker:
    t = m.tiling
    r = sc.obstacle_radius
    speed = sc.obstacle_speeds[i % len(sc.obstacle_speeds)]
    clear_start = sc.cobot_speed * 0.8 + speed * 0.4 + r + sc.cobot_radius + 1.0
    clear_goal = r + sc.cobot_radius + t.cell_size
    for _ in range(1000):
        x = rng.uniform(t.origin.x + r, t.origin.x + t.width - r)
        y = rng.uniform(t.origin.y + r, t.origin.y + t.height - r)
        if math.hypot(x - sc.start[0], y - sc.start[1]) < clear_start:
            continue
        if math.hypot(x - sc.goal[0], y - sc.goal[1]) < clear_goal:
            continue
        if not m.point_free((x, y)):
            continue
        return Walker(i, x, y, speed, r)
    raise ScenarioError("could not place obstacle in free space")


def _dist_to_polyline(x, y, pts) -> float:
    best = math.inf
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        dx = bx - ax
        dy = by - ay
        den = dx * dx + dy * dy
        t = 0.0 if den == 0 else min(max(((x - ax) * dx + (y - ay) * dy) / den, 0.0), 1.0)
        best = min(best, math.hypot(x - ax - t * dx, y - ay - t * dy))
    if len(pts) == 1:
        best = math.hypot(x - pts[0][0], y - pts[0][1])
    return best


def _initial_walkers(sc, m, area, seed, path_pts, horizon):
    """Obstacle set and walk streams for ``seed``.

    Candidate sub-seeds are tried in order until one yields a walk that
    enters the corridor around the initial path within ``horizon`` seconds.
    Returns (walkers, obstacle rngs, noise rng, planner rng, attempts).
    """
    if sc.n_obstacles == 0:
        _, noise_rng, plan_rng = _streams(seed, 0)
        return [], [], noise_rng, plan_rng, 1
    for attempt in range(CORRIDOR_ATTEMPTS):
        sub = seed if attempt == 0 else seed * 1_000_003 + attempt
        orngs, noise_rng, plan_rng = _streams(sub, sc.n_obstacles)
        walkers = [_spawn(sc, m, orngs[i], i) for i in range(sc.n_obstacles)]
        trial = [(Walker(**vars(w)), random.Random()) for w in walkers]
        for (tw, tr), orng in zip(trial, orngs):
            tr.setstate(orng.getstate())
        hit = False
        steps = max(1, math.ceil(horizon / sc.dt))
        for _ in range(steps):
            for tw, tr in trial:
                obstacle_step(tw, area[tw.radius], sc.dt, tr, sc.max_walk)
                if _dist_to_polyline(tw.x, tw.y, path_pts) <= sc.corridor_half_width:
                    hit = True
            if hit:
                break
        if hit or attempt == CORRIDOR_ATTEMPTS - 1:
            return walkers, orngs, noise_rng, plan_rng, attempt + 1


_TREE_CACHE: dict = {}


def initial_forest(sc: ScenarioConfig, m: StaticMap, cfg: PlannerConfig):
    """Initial goal-rooted tree for the scenario, shared by all its trials."""
    key = (sc.width, sc.height, sc.cell_size, sc.map_path, sc.base_dir, sc.cobot_radius, sc.goal,
           cfg.rrt_samples, cfg.step, cfg.seed, cfg.backend)
    f = _TREE_CACHE.get(key)
    if f is None:
        f = build_initial_tree(m, Point2(*sc.goal), cfg.rrt_samples, cfg.step, cfg.seed,
                               checker=m.checker(backend=cfg.backend))
        _TREE_CACHE[key] = f
    return f.copy()


def _collides(pos, walkers, r_R) -> bool:
    return any(math.hypot(w.x - pos[0], w.y - pos[1]) < w.radius + r_R for w in walkers)


def run_trial(sc: ScenarioConfig, cfg: PlannerConfig | None = None, seed: int = 0,
              tracer=None, backend=None, walkers=None) -> TrialResult:
    """Simulate one trial.  ``walkers`` overrides the random obstacle set (the
    walk streams stay seeded); ``tracer`` receives per-tick records."""
    m = sc.static_map()
    pm = sc.planning_map(m)
    if cfg is None:
        cfg = sc.planner_config(backend)
    if not pm.point_free(sc.start) or not pm.point_free(sc.goal):
        raise ScenarioError("start and goal must lie in free cells of the inflated map")
    planner = Planner(pm, sc.goal, cfg, forest=initial_forest(sc, pm, cfg))
    traj = planner.plan_initial(sc.start)
    areas = {}
    radii = {sc.obstacle_radius} | ({w.radius for w in walkers} if walkers else set())
    for r in radii:
        areas[r] = _WalkArea(m, r)
    if walkers is None:
        walkers, orngs, noise_rng, plan_rng, _ = _initial_walkers(
            sc, m, areas, seed, [tuple(p) for p in traj.waypoints], traj.duration)
    else:
        orngs, noise_rng, plan_rng = _streams(seed, len(walkers))
        walkers = [Walker(**vars(w)) for w in walkers]
    planner.rng = plan_rng

    dt = sc.dt
    v = sc.cobot_speed
    r_R = sc.cobot_radius
    straight = math.hypot(sc.goal[0] - sc.start[0], sc.goal[1] - sc.start[1]) / v
    timeout = max(sc.timeout_factor * straight, 10 * dt)
    pos = Point2(*sc.start)
    speed = v
    idx = 1
    clock = 0.0
    motion = 0.0
    last_good = pos
    res = TrialResult(seed, False, None, [], [], 0, False)
    if tracer is not None:
        tracer.begin(m, planner.forest, traj)

    def advance_obstacles(step):
        for w, r in zip(walkers, orngs):
            obstacle_step(w, areas[w.radius], step, r, sc.max_walk)

    while True:
        if _collides(pos, walkers, r_R):
            res.collision = True
            break
        if traj is not None and idx >= len(traj.waypoints):
            res.success = True
            res.travel_time = clock
            break
        if clock > timeout:
            res.timeout = True
            break
        res.ticks += 1
        seen_pos, seen_obs = perceive(pos, walkers, sc.noise, noise_rng)
        if not pm.point_free(seen_pos):
            seen_pos = _snap(seen_pos, traj, idx, last_good)
        last_good = seen_pos
        before = tracer.snapshot(planner.forest) if tracer is not None else None
        out = planner.tick(seen_pos, speed, seen_obs, traj, idx, clock)
        if tracer is not None:
            tracer.tick(clock, pos, walkers, out, planner.forest, before)
        if out.kind != "kept":
            if out.kind == "replanned":
                res.replan_count += 1
                res.wall_times.append(out.wall_time)
                if sc.replan_clock == "wall":
                    cost = out.wall_time
                elif sc.replan_clock == "ops":
                    cost = (sc.replan_base_us + out.ops * sc.us_per_op) * 1e-6
                else:
                    cost = 0.0
                res.replanning_times.append(cost)
                if tracer is not None:
                    tracer.replan(clock, cost, out)
                traj = out.trajectory
                idx = 1
                speed = v
                if cost > 0.0:
                    clock += cost
                    advance_obstacles(cost)
                    if _collides(pos, walkers, r_R):
                        res.collision = True
                        break
            else:
                res.failed_ticks += 1
                traj = None
                speed = 0.0
                clock += dt
                motion += dt
                advance_obstacles(dt)
                continue
        # move along the trajectory for one tick
        budget = v * dt
        used = 0.0
        wps = traj.waypoints
        while budget > 0.0 and idx < len(wps):
            tx, ty = wps[idx]
            d = math.hypot(tx - pos[0], ty - pos[1])
            if d <= budget:
                pos = Point2(tx, ty)
                budget -= d
                used += d
                idx += 1
            else:
                pos = Point2(pos[0] + (tx - pos[0]) * budget / d, pos[1] + (ty - pos[1]) * budget / d)
                used += budget
                budget = 0.0
        step = dt if idx < len(wps) else used / v
        if step > 0.0:
            advance_obstacles(step)
        clock += step
        motion += step
        if idx >= len(wps) and step == 0.0:
            continue
    res.motion_time = motion
    if tracer is not None:
        tracer.end(clock, pos, walkers, res)
    return res


def _snap(p, traj, idx, fallback):
    """Closest point to ``p`` on the current trajectory leg, else ``fallback``."""
    if traj is None or idx >= len(traj.waypoints) or idx < 1:
        return fallback
    (ax, ay), (bx, by) = traj.waypoints[idx - 1], traj.waypoints[idx]
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    t = 0.0 if den == 0 else min(max(((p[0] - ax) * dx + (p[1] - ay) * dy) / den, 0.0), 1.0)
    return Point2(ax + t * dx, ay + t * dy)
