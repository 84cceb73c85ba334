"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py            # kernel + tree + trial timings
    python3 benchmarks/bench_kernels.py --calibrate # fit the deterministic replan clock
"""
import argparse
import random
import statistics
import time

import numpy as np

from smartplan import kernels
from smartplan.sim import ScenarioConfig, run_trial, _TREE_CACHE
from smartplan.tree import build_initial_tree
from smartplan.world import StaticMap, Tiling


def _segments(n, size, seed=0):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        ax = rng.uniform(0, size)
        ay = rng.uniform(0, size)
        out.append((ax, ay, ax + rng.uniform(-1.5, 1.5), ay + rng.uniform(-1.5, 1.5)))
    return out


def bench_free(backend, n=200_000):
    occ = (np.random.default_rng(0).random((32, 32)) < 0.2).astype(np.uint8)
    ch = kernels.get_backend(backend).EdgeChecker(occ, 0.0, 0.0, 1.0)
    ch.set_discs([(8.0, 8.0, 1.8), (20.0, 12.0, 1.8), (16.0, 25.0, 2.6)])
    segs = _segments(n, 32.0)
    t = time.perf_counter()
    for s in segs:
        ch.free(*s)
    return (time.perf_counter() - t) / n * 1e6


def bench_tree(backend, reps=3):
    m = StaticMap(Tiling(32, 32, 1.0))
    best = float("inf")
    for _ in range(reps):
        t = time.perf_counter()
        build_initial_tree(m, (30.0, 30.0), 2048, rng_seed=0, checker=m.checker(backend=backend))
        best = min(best, time.perf_counter() - t)
    return best


def bench_trials(backend, trials=10):
    sc = ScenarioConfig()
    cfg = sc.planner_config(backend)
    walls = []
    t = time.perf_counter()
    for s in range(trials):
        walls.extend(run_trial(sc, cfg, seed=s).wall_times)
    return time.perf_counter() - t, statistics.median(walls) * 1e3 if walls else float("nan")


def calibrate(trials=25):
    from smartplan import planner as P

    rec = []
    orig = P.Planner.tick

    def tick(self, *a, **k):
        out = orig(self, *a, **k)
        if out.kind == "replanned":
            rec.append((out.wall_time, out.ops))
        return out

    P.Planner.tick = tick
    try:
        for sp in (1.0, 2.0, 3.0, 4.0):
            sc = ScenarioConfig(obstacle_speeds=(sp,))
            for s in range(trials):
                run_trial(sc, seed=s)
    finally:
        P.Planner.tick = orig
    w = np.array([a for a, _ in rec])
    o = np.array([b for _, b in rec], dtype=float)
    A = np.vstack([np.ones_like(o), o]).T
    (base, per), *_ = np.linalg.lstsq(A, w, rcond=None)
    pred = A @ np.array([base, per])
    r2 = 1 - ((w - pred) ** 2).sum() / ((w - w.mean()) ** 2).sum()
    print(f"replans={len(rec)} base_us={base * 1e6:.1f} us_per_op={per * 1e6:.3f} r2={r2:.3f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--calibrate", action="store_true")
    ap.add_argument("--trials", type=int, default=10)
    args = ap.parse_args()
    if args.calibrate:
        calibrate()
        return
    print(f"backends: {', '.join(kernels.available())}")
    print(f"{'backend':8} {'free() us':>10} {'tree s':>8} {'trials s':>9} {'replan ms':>10}")
    for b in kernels.available():
        _TREE_CACHE.clear()
        tt, med = bench_trials(b, args.trials)
        print(f"{b:8} {bench_free(b):10.3f} {bench_tree(b):8.3f} {tt:9.2f} {med:10.3f}")


if __name__ == "__main__":
    main()
