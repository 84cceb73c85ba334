"""Real-time replanning for a disc robot among moving disc obstacles.

Risk-based local pruning of a goal-rooted tree followed by hot-spot tree
repair, plus a seeded simulator and benchmark harness.
"""
from .geometry import Disc, Point2, Segment2
from .kernels import BACKEND
from .planner import Planner, PlannerConfig, Trajectory, TickOutcome, plan_initial
from .pruning import ObstacleState, RiskModel, compute_risk, prune, validate_path
from .repair import repair
from .tree import Forest, build_initial_tree, rewire_cascade
from .world import StaticMap, Tiling, load_map, parse_map

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Disc", "Forest", "ObstacleState", "Planner", "PlannerConfig", "Point2",
    "RiskModel", "Segment2", "StaticMap", "TickOutcome", "Tiling", "Trajectory",
    "build_initial_tree", "compute_risk", "load_map", "parse_map", "plan_initial", "prune",
    "repair", "rewire_cascade", "validate_path",
]
