"""Command line: single runs with traces, benchmark grids, SVG snapshots."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .sim import ScenarioConfig, ScenarioError, run_trial
from .world import MapFormatError

log = logging.getLogger("smartplan")

CSV_HEADER = ("n_obstacles,speed,trials,success_rate,replan_mean_ms,replan_median_ms,"
              "replan_p25_ms,replan_p75_ms,travel_median_s,travel_p25_s,travel_p75_s")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _f(v) -> str:
    return f"{v:.4f}"


class Tracer:
    """Writes the line-oriented trace consumed by ``snapshot``."""

    def __init__(self, fh):
        self.fh = fh

    def _w(self, *parts):
        self.fh.write(" ".join(parts) + "\n")

    @staticmethod
    def _tree_index(forest, nid):
        nodes = forest.nodes
        while nodes[nid].parent is not None:
            nid = nodes[nid].parent
        return 0 if nid == forest.goal_root else nid

    def _edge_add(self, forest, nid):
        n = forest.nodes[nid]
        p = forest.nodes[n.parent]
        self._w("EDGE+", str(nid), str(p.id), _f(n.x), _f(n.y), _f(p.x), _f(p.y),
                str(self._tree_index(forest, nid)))

    def _path(self, t, traj):
        if traj is None:
            return
        self._w("PATH", _f(t), *(_f(v) for w in traj.waypoints for v in w))

    def begin(self, m, forest, traj):
        t = m.tiling
        self._w("STATIC", f"{t.width:g}", f"{t.height:g}", f"{t.cell_size:g}")
        for r in range(t.rows):
            self._w("MAP", str(r), "".join("#" if v else "." for v in m.occupied[r]))
        g = forest.nodes[forest.goal_root]
        self._w("GOAL", _f(g.x), _f(g.y))
        for n in forest.nodes:
            if n.active and n.parent is not None:
                self._edge_add(forest, n.id)
        self._path(0.0, traj)

    def snapshot(self, forest):
        return [n.parent if n.active else None for n in forest.nodes]

    def tick(self, clock, pos, walkers, out, forest, before):
        self._w("TICK", _f(clock), _f(pos[0]), _f(pos[1]))
        for w in walkers:
            self._w("OBS", str(w.id), _f(w.x), _f(w.y), _f(w.radius))
        risk = out.risk
        if risk is not None:
            lrz = risk.lrz
            self._w("LRZ", _f(lrz.center[0]), _f(lrz.center[1]), _f(lrz.radius))
            for oid, d in risk.ohz:
                self._w("OHZ", str(oid), _f(d.center[0]), _f(d.center[1]), _f(d.radius))
            if out.kind != "kept":
                for d in risk.cpr:
                    self._w("CPR", _f(d.center[0]), _f(d.center[1]), _f(d.radius))
        if out.kind == "kept":
            return
        nodes = forest.nodes
        for nid, n in enumerate(nodes):
            old = before[nid] if nid < len(before) else None
            new = n.parent if n.active else None
            if old == new:
                continue
            if old is not None:
                self._w("EDGE-", str(nid), str(old))
            if new is not None:
                self._edge_add(forest, nid)

    def replan(self, clock, cost, out):
        self._w("REPLAN", _f(clock), f"{cost * 1e3:.3f}", str(out.l_final))
        self._path(clock, out.trajectory)

    def end(self, clock, pos, walkers, res):
        tt = "nan" if res.travel_time is None else _f(res.travel_time)
        self._w("RESULT", str(int(res.success)), str(int(res.collision)), tt)


def _scenario(args) -> ScenarioConfig:
    sc = ScenarioConfig.load(args.scenario)
    over = {}
    if getattr(args, "ideal_replan", False):
        over["replan_clock"] = "ideal"
    elif getattr(args, "replan_clock", None):
        over["replan_clock"] = args.replan_clock
    if getattr(args, "dt", None) is not None:
        over["dt"] = args.dt
    if over:
        sc = dataclasses.replace(sc, **over)
    return sc


def _stats_ms(xs):
    if not xs:
        return ["nan"] * 4
    a = np.asarray(xs, dtype=float) * 1e3
    return [f"{v:.6f}" for v in (a.mean(), np.median(a), np.percentile(a, 25), np.percentile(a, 75))]


def _stats_s(xs):
    if not xs:
        return ["nan"] * 3
    a = np.asarray(xs, dtype=float)
    return [f"{v:.6f}" for v in (np.median(a), np.percentile(a, 25), np.percentile(a, 75))]


def _bench_task(task):
    sc, seed = task
    r = run_trial(sc, seed=seed)
    return r.success, r.travel_time, list(r.replanning_times)


def bench_rows(sc: ScenarioConfig, counts, speeds, trials, seed, jobs=1):
    configs = [(n, sp) for n in counts for sp in speeds]
    tasks = []
    for n, sp in configs:
        csc = dataclasses.replace(sc, n_obstacles=n, obstacle_speeds=sp)
        tasks.extend((csc, seed + i) for i in range(trials))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_bench_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_bench_task(t) for t in tasks]
    rows = []
    for k, (n, sp) in enumerate(configs):
        chunk = results[k * trials:(k + 1) * trials]
        ok = [r for r in chunk if r[0]]
        replans = [x for r in chunk for x in r[2]]
        speed = "/".join(f"{v:g}" for v in sp)
        rows.append(",".join([str(n), speed, str(trials), f"{len(ok) / trials:.4f}",
                              *_stats_ms(replans), *_stats_s([r[1] for r in ok])]))
    return rows


def cmd_run(args) -> int:
    sc = _scenario(args)
    seed = sc.seed if args.seed is None else args.seed
    if args.trace:
        with open(args.trace, "w") as fh:
            r = run_trial(sc, seed=seed, tracer=Tracer(fh))
    else:
        r = run_trial(sc, seed=seed)
    med = "nan" if not r.replanning_times else f"{1e3 * float(np.median(r.replanning_times)):.3f}"
    tt = "nan" if r.travel_time is None else f"{r.travel_time:.3f}"
    print(f"seed={seed} success={int(r.success)} collision={int(r.collision)} "
          f"timeout={int(r.timeout)} travel_time_s={tt} replans={r.replan_count} "
          f"replan_median_ms={med} ticks={r.ticks}")
    return EXIT_OK


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_bench(args) -> int:
    sc = _scenario(args)
    trials = sc.trials if args.trials is None else args.trials
    if trials < 1:
        raise ScenarioError("--trials must be >= 1")
    if args.jobs < 1:
        raise ScenarioError("--jobs must be >= 1")
    seed = sc.seed if args.seed is None else args.seed
    speeds = [(v,) for v in args.speeds] if args.speeds else [sc.obstacle_speeds]
    counts = args.counts if args.counts else [sc.n_obstacles]
    rows = bench_rows(sc, counts, speeds, trials, seed, args.jobs)
    text = CSV_HEADER + "\n" + "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


class TraceError(ValueError):
    pass


def parse_trace(text):
    """Split a trace into header records and per-tick record blocks."""
    head = []
    ticks = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        kind = parts[0]
        if kind not in _ARITY:
            raise TraceError(f"line {i}: unknown record {kind!r}")
        lo, hi = _ARITY[kind]
        if not (lo <= len(parts) - 1 <= hi):
            raise TraceError(f"line {i}: bad field count for {kind}")
        if kind == "TICK":
            ticks.append([])
        (ticks[-1] if ticks else head).append((i, parts))
    if not head or head[0][1][0] != "STATIC":
        raise TraceError("trace must start with a STATIC record")
    return head, ticks


_ARITY = {
    "STATIC": (3, 3), "MAP": (2, 2), "GOAL": (2, 2), "EDGE+": (7, 7), "EDGE-": (2, 2),
    "PATH": (3, 10**9), "TICK": (3, 3), "OBS": (4, 4), "LRZ": (3, 3), "OHZ": (4, 4),
    "CPR": (3, 3), "REPLAN": (3, 3), "RESULT": (3, 3),
}

_PALETTE = ["#2b7bba", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"]


def render_svg(head, ticks, k, scale=20.0) -> str:
    if not 0 <= k < len(ticks):
        raise IndexError(f"tick {k} out of range (trace has {len(ticks)} ticks)")
    try:
        _, w, h, cs = head[0][1]
        W, H, CS = float(w), float(h), float(cs)
        edges = {}
        path = None
        grid = []
        goal = None

        def apply(parts):
            nonlocal path, goal
            kind = parts[0]
            if kind == "EDGE+":
                edges[int(parts[1])] = (tuple(map(float, parts[3:7])), int(parts[7]))
            elif kind == "EDGE-":
                edges.pop(int(parts[1]), None)
            elif kind == "PATH":
                vals = list(map(float, parts[2:]))
                path = list(zip(vals[0::2], vals[1::2]))
            elif kind == "MAP":
                grid.append((int(parts[1]), parts[2]))
            elif kind == "GOAL":
                goal = (float(parts[1]), float(parts[2]))

        for _, parts in head:
            apply(parts)
        for blk in ticks[:k + 1]:
            for _, parts in blk:
                apply(parts)
        cur = ticks[k]
        cobot = tuple(map(float, cur[0][1][2:4]))
        obs = [tuple(map(float, p[2:5])) for _, p in cur if p[0] == "OBS"]
        lrz = [tuple(map(float, p[1:4])) for _, p in cur if p[0] == "LRZ"]
        ohz = [tuple(map(float, p[2:5])) for _, p in cur if p[0] == "OHZ"]
        cpr = [tuple(map(float, p[1:4])) for _, p in cur if p[0] == "CPR"]
    except (ValueError, IndexError) as exc:
        raise TraceError(f"malformed trace: {exc}") from None

    def X(x):
        return f"{x * scale:.2f}"

    def Y(y):
        return f"{(H - y) * scale:.2f}"

    def R(r):
        return f"{r * scale:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * scale:.0f}" '
           f'height="{H * scale:.0f}" viewBox="0 0 {W * scale:.2f} {H * scale:.2f}">',
           f'<rect width="100%" height="100%" fill="white"/>']
    out.append('<g id="static" fill="#444">')
    for r, row in grid:
        for c, ch in enumerate(row):
            if ch == "#":
                out.append(f'<rect x="{X(c * CS)}" y="{Y((r + 1) * CS)}" width="{R(CS)}" height="{R(CS)}"/>')
    out.append("</g>")
    out.append('<g id="tree" stroke-width="1">')
    for nid in sorted(edges):
        (x1, y1, x2, y2), tree = edges[nid]
        col = _PALETTE[0] if tree == 0 else _PALETTE[1 + tree % (len(_PALETTE) - 1)]
        out.append(f'<line x1="{X(x1)}" y1="{Y(y1)}" x2="{X(x2)}" y2="{Y(y2)}" stroke="{col}"/>')
    out.append("</g>")
    out.append('<g id="zones" fill="none">')
    for x, y, r in lrz:
        out.append(f'<circle class="lrz" cx="{X(x)}" cy="{Y(y)}" r="{R(r)}" stroke="#1a9850" stroke-dasharray="4 2"/>')
    for x, y, r in ohz:
        out.append(f'<circle class="ohz" cx="{X(x)}" cy="{Y(y)}" r="{R(r)}" stroke="#fdae61"/>')
    out.append("</g>")
    out.append('<g id="cpr" fill="#d73027" fill-opacity="0.25" stroke="#d73027">')
    for x, y, r in cpr:
        out.append(f'<circle class="cpr" cx="{X(x)}" cy="{Y(y)}" r="{R(r)}"/>')
    out.append("</g>")
    out.append('<g id="path" fill="none" stroke="black" stroke-width="2">')
    if path:
        pts = " ".join(f"{X(x)},{Y(y)}" for x, y in path)
        out.append(f'<polyline points="{pts}"/>')
    out.append("</g>")
    out.append('<g id="agents">')
    if goal is not None:
        out.append(f'<circle class="goal" cx="{X(goal[0])}" cy="{Y(goal[1])}" r="{R(0.3)}" fill="#1a9850"/>')
    for x, y, r in obs:
        out.append(f'<circle class="obstacle" cx="{X(x)}" cy="{Y(y)}" r="{R(r)}" fill="#555"/>')
    out.append(f'<circle class="cobot" cx="{X(cobot[0])}" cy="{Y(cobot[1])}" r="{R(0.5)}" fill="#2166ac"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_snapshot(args) -> int:
    try:
        text = Path(args.trace).read_text()
    except FileNotFoundError:
        print(f"error: trace not found: {args.trace}", file=sys.stderr)
        return EXIT_USAGE
    try:
        head, ticks = parse_trace(text)
        svg = render_svg(head, ticks, args.tick)
    except (TraceError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    Path(args.out).write_text(svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smartplan", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="base seed (default: scenario seed)")
        p.add_argument("--ideal-replan", action="store_true", help="charge no time for replanning")
        p.add_argument("--replan-clock", choices=("ops", "wall", "ideal"), default=None,
                       help="how replanning time is charged to the simulated clock")
        p.add_argument("--dt", type=float, default=None, help="simulation tick in seconds")

    p = sub.add_parser("run", help="simulate one trial")
    common(p)
    p.add_argument("--trace", help="write a replay trace here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run a grid of trials and write a CSV summary")
    common(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--speeds", type=_floats, default=None, help="e.g. 1,2,3,4")
    p.add_argument("--counts", type=_ints, default=None, help="e.g. 10,15")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("snapshot", help="render one tick of a trace as SVG")
    p.add_argument("--trace", required=True)
    p.add_argument("--tick", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_snapshot)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("SMART_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        msg = str(exc)
        if "scenario not found" not in msg:
            msg = f"file not found: {exc.filename or msg}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, MapFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level guard
        log.debug("unhandled error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
