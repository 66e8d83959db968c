"""Centerline planning on the costmap and rigid-rod waypoint derivation.

The search is 8-connected A* with edge cost = step length x mean of the two
endpoint cell costs and heuristic = Euclidean distance x minimum free-cell
cost. Expansion continues until no frontier entry can beat the incumbent goal
cost, so the returned cost equals the Dijkstra optimum exactly (same float
additions along the optimal path). Ties break on (f, h, cell index) so paths
are reproducible.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BlockedEndpointError,
    ChordInfeasibleError,
    EmptyPathError,
    InvalidParamsError,
    NoPathError,
    PathTooShortError,
)
from .phantom import CostMap, DistanceField, OccupancyGrid

_NEIGHBORS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
)


@dataclass(frozen=True)
class Path:
    """Centerline polyline in mm (cell centers), with per-vertex branch flags."""

    waypoints: np.ndarray  # float64, shape (n, 2)
    branch_flags: np.ndarray  # bool, shape (n,)
    arc_length: float  # mm
    cost: float  # accumulated search cost of the full path

    def __post_init__(self) -> None:
        self.waypoints.setflags(write=False)
        self.branch_flags.setflags(write=False)

    def __len__(self) -> int:
        return len(self.waypoints)

    @cached_property
    def arc_at(self) -> np.ndarray:
        """Cumulative arc length at every vertex."""
        deltas = np.hypot(*np.diff(self.waypoints, axis=0).T)
        arcs = np.concatenate([[0.0], np.cumsum(deltas)])
        arcs.setflags(write=False)
        return arcs

    def point_at_arc(self, s: float) -> np.ndarray:
        """Point at arc length s (clamped to the ends)."""
        arcs = self.arc_at
        s = min(max(s, 0.0), float(arcs[-1]))
        j = int(np.searchsorted(arcs, s, side="right")) - 1
        j = min(j, len(arcs) - 2) if len(arcs) > 1 else 0
        if len(arcs) == 1:
            return self.waypoints[0].copy()
        seg = arcs[j + 1] - arcs[j]
        t = 0.0 if seg <= 0 else (s - arcs[j]) / seg
        return self.waypoints[j] + t * (self.waypoints[j + 1] - self.waypoints[j])

    def to_json_dict(self) -> dict:
        return {
            "waypoints": self.waypoints.tolist(),
            "branch": self.branch_flags.tolist(),
            "arc_length_mm": self.arc_length,
            "cost": self.cost,
        }


@dataclass(frozen=True)
class DualArmPlan:
    """Equal-length tip waypoint sequences for head and tail manipulators.

    Every index satisfies |head_k - tail_k| == rod_length to 1e-6 mm; both
    sequences lie on the source centerline, hence in free space.
    """

    head_waypoints: np.ndarray  # (n, 2) mm
    tail_waypoints: np.ndarray  # (n, 2) mm
    rod_length: float
    source: Path

    def __post_init__(self) -> None:
        self.head_waypoints.setflags(write=False)
        self.tail_waypoints.setflags(write=False)

    def __len__(self) -> int:
        return len(self.head_waypoints)

    def to_json_dict(self) -> dict:
        return {
            "head_waypoints": self.head_waypoints.tolist(),
            "tail_waypoints": self.tail_waypoints.tolist(),
            "rod_length_mm": self.rod_length,
            "path": self.source.to_json_dict(),
        }


def plan_to_json(plan: DualArmPlan) -> str:
    return json.dumps({"v": 1, **plan.to_json_dict()})


# ---------------------------------------------------------------------------
# A* centerline search
# ---------------------------------------------------------------------------


def _branch_flags_for(
    cells: list[tuple[int, int]], field: DistanceField, occupied: np.ndarray
) -> np.ndarray:
    """Flag vertices whose local free space has more than two corridor exits.

    The free-space degree at a cell is the number of maximal free arcs on a
    ring placed just beyond the local clearance, i.e. the number of channels
    meeting there; > 2 marks a bifurcation. Arcs spanning under 20 degrees are
    rasterization noise and do not count as exits.
    """
    flags = np.zeros(len(cells), dtype=bool)
    h, w = occupied.shape
    for idx, (r, c) in enumerate(cells):
        clearance_cells = math.sqrt(float(field.sq_cells[r, c]))
        radius = clearance_cells + 2.0
        if radius >= min(h, w) / 2.0:
            continue
        n_samples = max(32, int(math.ceil(2 * math.pi * radius)) * 2)
        angles = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
        rr = np.clip(np.round(r + radius * np.sin(angles)).astype(int), 0, h - 1)
        cc = np.clip(np.round(c + radius * np.cos(angles)).astype(int), 0, w - 1)
        free_ring = ~occupied[rr, cc]
        if free_ring.all() or not free_ring.any():
            continue
        min_span = max(1, int(n_samples * 20.0 / 360.0))
        # rotate so the ring starts on a wall sample, then measure arc runs
        start = int(np.argmin(free_ring))
        ring = np.roll(free_ring, -start)
        arcs = 0
        run = 0
        for v in ring:
            if v:
                run += 1
            else:
                if run >= min_span:
                    arcs += 1
                run = 0
        if run >= min_span:
            arcs += 1
        flags[idx] = arcs > 2
    return flags


def plan_centerline(
    costmap: CostMap,
    field: DistanceField,
    start: np.ndarray,
    goal: np.ndarray,
) -> Path:
    """Optimal 8-connected path on the costmap from start to goal (both in mm)."""
    res = costmap.resolution
    cost = costmap.cost
    h, w = cost.shape

    def to_cell(p) -> tuple[int, int]:
        r = min(int(p[1] / res), h - 1)
        c = min(int(p[0] / res), w - 1)
        if not (0 <= p[0] < w * res and 0 <= p[1] < h * res):
            raise BlockedEndpointError(f"endpoint {tuple(p)} outside grid")
        return r, c

    sr, sc = to_cell(start)
    gr, gc = to_cell(goal)
    if not np.isfinite(cost[sr, sc]):
        raise BlockedEndpointError(f"start cell ({sr}, {sc}) occupied")
    if not np.isfinite(cost[gr, gc]):
        raise BlockedEndpointError(f"goal cell ({gr}, {gc}) occupied")

    min_cost = costmap.min_free_cost
    diag = math.sqrt(2.0) * res

    def heuristic(r: int, c: int) -> float:
        return math.hypot((r - gr) * res, (c - gc) * res) * min_cost

    start_idx = sr * w + sc
    goal_idx = gr * w + gc
    g = {start_idx: 0.0}
    came: dict[int, int] = {}
    best_goal = math.inf
    h0 = heuristic(sr, sc)
    frontier: list[tuple[float, float, int, float]] = [(h0, h0, start_idx, 0.0)]
    while frontier:
        f, _, idx, g_pushed = heapq.heappop(frontier)
        if f >= best_goal:
            break  # nothing left can improve the incumbent
        g_cur = g[idx]
        if g_pushed > g_cur:
            continue  # stale entry superseded by a cheaper relaxation
        r, c = idx // w, idx % w
        for dr, dc in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            ncost = cost[nr, nc]
            if not np.isfinite(ncost):
                continue
            step = diag if dr and dc else res
            cand = g_cur + step * (cost[r, c] + ncost) / 2.0
            nidx = nr * w + nc
            if cand < g.get(nidx, math.inf):
                g[nidx] = cand
                came[nidx] = idx
                if nidx == goal_idx:
                    best_goal = min(best_goal, cand)
                hn = heuristic(nr, nc)
                heapq.heappush(frontier, (cand + hn, hn, nidx, cand))
    if goal_idx not in g and goal_idx != start_idx:
        raise NoPathError("start and goal are in disconnected free regions")

    chain = [goal_idx]
    while chain[-1] != start_idx:
        chain.append(came[chain[-1]])
    chain.reverse()
    cells = [(i // w, i % w) for i in chain]
    pts = np.array([[(c + 0.5) * res, (r + 0.5) * res] for r, c in cells])
    deltas = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.array([])
    flags = _branch_flags_for(cells, field, ~np.isfinite(cost))
    return Path(
        waypoints=pts,
        branch_flags=flags,
        arc_length=float(deltas.sum()),
        cost=g.get(goal_idx, 0.0),
    )


# ---------------------------------------------------------------------------
# rigid-rod tip waypoints
# ---------------------------------------------------------------------------


def _chord_point_behind(
    waypoints: np.ndarray, arcs: np.ndarray, head: np.ndarray, head_arc: float, L: float
) -> np.ndarray:
    """Point on the polyline at exact chord distance L behind the head.

    Walks segments backward from the head and solves |p(t) - head| = L on each
    (quadratic in the segment parameter), returning the crossing closest behind
    the head. The rod is rigid, so the constraint is chord length; the arc
    offset only brackets the search.
    """
    j = int(np.searchsorted(arcs, head_arc, side="right")) - 1
    j = max(0, min(j, len(waypoints) - 2))
    # segment containing the head first, clipped at the head itself
    for k in range(j, -1, -1):
        a = waypoints[k]
        b = head if k == j else waypoints[k + 1]
        d = b - a
        seg2 = float(d @ d)
        if seg2 < 1e-18:
            continue
        rel = a - head
        # |rel + t d|^2 = L^2
        A = seg2
        B = 2.0 * float(rel @ d)
        C = float(rel @ rel) - L * L
        disc = B * B - 4 * A * C
        if disc < 0:
            continue
        sqrt_disc = math.sqrt(disc)
        # larger root = farther along the segment = closer behind the head
        for t in ((-B + sqrt_disc) / (2 * A), (-B - sqrt_disc) / (2 * A)):
            if -1e-12 <= t <= 1.0 + 1e-12:
                return a + min(max(t, 0.0), 1.0) * d
    raise ChordInfeasibleError(
        f"no polyline point at chord distance {L} mm behind head at arc {head_arc:.3f}"
    )


def derive_tip_waypoints(
    path: Path, rod_length: float, grid: OccupancyGrid, step_mm: float | None = None
) -> DualArmPlan:
    """Head/tail manipulator waypoints for a fixed-length rigid rod on a path.

    Heads are arc-length samples (increment ``step_mm``, default one cell);
    tails are the chord-exact trailing points. The final path point is always
    included so the head sequence reaches the goal.
    """
    if rod_length <= 0:
        raise InvalidParamsError(f"rod length must be > 0, got {rod_length}")
    if path.arc_length < rod_length:
        raise PathTooShortError(
            f"path arc {path.arc_length:.3f} mm shorter than rod {rod_length} mm"
        )
    step = step_mm if step_mm is not None else grid.resolution
    if step <= 0:
        raise InvalidParamsError("step_mm must be > 0")
    arcs = path.arc_at
    total = float(arcs[-1])
    s_values = list(np.arange(rod_length, total, step))
    if not s_values or total - s_values[-1] > 1e-9:
        s_values.append(total)
    heads = []
    tails = []
    for s in s_values:
        head = path.point_at_arc(float(s))
        tail = _chord_point_behind(path.waypoints, arcs, head, float(s), rod_length)
        heads.append(head)
        tails.append(tail)
    return DualArmPlan(
        head_waypoints=np.array(heads),
        tail_waypoints=np.array(tails),
        rod_length=rod_length,
        source=path,
    )


def check_arm_separation(
    plan: DualArmPlan, min_sep: float, tip_radius: float = 1.5
) -> bool:
    """True iff tips stay at least min_sep apart and tip disks never intersect."""
    gaps = np.hypot(*(plan.head_waypoints - plan.tail_waypoints).T)
    return bool((gaps >= min_sep - 1e-12).all() and (gaps >= 2 * tip_radius - 1e-12).all())


# ---------------------------------------------------------------------------
# waypoint following
# ---------------------------------------------------------------------------


@dataclass
class FollowCursor:
    head: int = 0
    tail: int = 0


class PathFollower:
    """Waypoint chase with a monotone progress cursor per arm.

    The cursor never backtracks; when a tip sits within the capture radius of
    its current waypoint the chase target advances to the next one, so the
    commanded velocity only vanishes at the end of the sequence.
    """

    def __init__(
        self,
        plan: DualArmPlan,
        gain: float,
        v_max: float,
        capture_radius: float = 0.25,
    ) -> None:
        if len(plan) == 0:
            raise EmptyPathError("plan has no waypoints")
        self.plan = plan
        self.gain = gain
        self.v_max = v_max
        self.capture_radius = capture_radius
        self.cursor = FollowCursor()

    def _arm_command(self, tip: np.ndarray, waypoints: np.ndarray, cur: int) -> tuple[np.ndarray, int]:
        d2 = (waypoints[cur:, 0] - tip[0]) ** 2 + (waypoints[cur:, 1] - tip[1]) ** 2
        j = cur + int(np.argmin(d2))
        last = len(waypoints) - 1
        # waypoint reached: consume it so the chase never targets backwards
        if j < last and math.hypot(*(waypoints[j] - tip)) <= self.capture_radius:
            j += 1
        v = self.gain * (waypoints[j] - tip)
        speed = float(np.hypot(v[0], v[1]))
        if speed > self.v_max:
            v = v * (self.v_max / speed)
        return v, max(cur, j)

    def command(self, head_tip: np.ndarray, tail_tip: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Velocity pair (head arm, tail arm) chasing the plan."""
        v_head, self.cursor.head = self._arm_command(
            head_tip, self.plan.head_waypoints, self.cursor.head
        )
        v_tail, self.cursor.tail = self._arm_command(
            tail_tip, self.plan.tail_waypoints, self.cursor.tail
        )
        return v_head, v_tail

    @property
    def done(self) -> bool:
        return (
            self.cursor.head >= len(self.plan) - 1
            and self.cursor.tail >= len(self.plan) - 1
        )


def path_follow_command(
    plan: DualArmPlan,
    head_tip: np.ndarray,
    tail_tip: np.ndarray,
    gain: float,
    v_max: float,
    cursor: FollowCursor | None = None,
) -> tuple[np.ndarray, np.ndarray, FollowCursor]:
    """Single-shot form of PathFollower.command; returns the advanced cursor."""
    follower = PathFollower(plan, gain, v_max)
    follower.cursor = cursor if cursor is not None else FollowCursor()
    v_head, v_tail = follower.command(head_tip, tail_tip)
    return v_head, v_tail, follower.cursor
