"""Desk-scale simulator for bimanual shared-control navigation of a magnetic
millirobot through a branching vascular phantom.

Core pieces: occupancy-grid phantoms with exact Euclidean distance fields and
wall-proximity costmaps, A* centerline planning with rigid-rod tip waypoints,
continuous per-arm authority blending with multi-step chunk aggregation and a
grip-force intent pipeline, bidirectional haptic rendering, a deterministic
trial loop with synthetic operators, objective trial metrics, and a live
WebSocket teleoperation service for human steering.
"""

from .config import BatchConfig, RunConfig, config_hash, load_run_config
from .control import (
    AuthorityChunk,
    AuthorityPair,
    ChunkBuffer,
    aggregate_chunks,
    blend_commands,
    bound_alpha,
    exponential_weights,
    make_policy,
)
from .errors import VesselSimError
from .metrics import compute_basic_metrics, score_trials, smoothness_raw
from .phantom import (
    CostMap,
    DistanceField,
    OccupancyGrid,
    SafetySnapshot,
    TreeSpec,
    build_costmap,
    distance_transform,
    generate_tree_phantom,
    load_grid,
    safety_snapshot,
)
from .planner import (
    DualArmPlan,
    Path,
    check_arm_separation,
    derive_tip_waypoints,
    plan_centerline,
)
from .simulate import RobotState, run_batch, run_trial, step
from .triallog import TrialLog, dump_jsonl, load_jsonl

__version__ = "0.1.0"

__all__ = [
    "AuthorityChunk",
    "AuthorityPair",
    "BatchConfig",
    "ChunkBuffer",
    "CostMap",
    "DistanceField",
    "DualArmPlan",
    "OccupancyGrid",
    "Path",
    "RobotState",
    "RunConfig",
    "SafetySnapshot",
    "TreeSpec",
    "TrialLog",
    "VesselSimError",
    "aggregate_chunks",
    "blend_commands",
    "bound_alpha",
    "build_costmap",
    "check_arm_separation",
    "compute_basic_metrics",
    "config_hash",
    "derive_tip_waypoints",
    "distance_transform",
    "dump_jsonl",
    "exponential_weights",
    "generate_tree_phantom",
    "load_grid",
    "load_jsonl",
    "load_run_config",
    "make_policy",
    "plan_centerline",
    "run_batch",
    "run_trial",
    "safety_snapshot",
    "score_trials",
    "smoothness_raw",
    "step",
]
