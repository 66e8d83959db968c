import heapq
import math

import numpy as np
import pytest

from vesselsim.errors import (
    BlockedEndpointError,
    ChordInfeasibleError,
    InvalidParamsError,
    NoPathError,
    PathTooShortError,
)
from vesselsim.phantom import (
    build_costmap,
    distance_transform,
    grid_from_mask,
)
from vesselsim.planner import (
    DualArmPlan,
    Path,
    PathFollower,
    check_arm_separation,
    derive_tip_waypoints,
    plan_centerline,
    plan_to_json,
)

SQ2 = math.sqrt(2.0)


def dijkstra_cost(costmap, start_cell, goal_cell) -> float:
    """Independent full-relaxation Dijkstra; the optimality oracle."""
    cost = costmap.cost
    h, w = cost.shape
    res = costmap.resolution
    dist = {start_cell: 0.0}
    pq = [(0.0, start_cell)]
    while pq:
        d, cell = heapq.heappop(pq)
        if d > dist.get(cell, math.inf):
            continue
        r, c = cell
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or not np.isfinite(cost[nr, nc]):
                    continue
                step = SQ2 * res if dr and dc else res
                nd = d + step * (cost[r, c] + cost[nr, nc]) / 2.0
                if nd < dist.get((nr, nc), math.inf):
                    dist[(nr, nc)] = nd
                    heapq.heappush(pq, (nd, (nr, nc)))
    return dist.get(goal_cell, math.inf)


def random_costmap(rng, n=32):
    free = rng.random((n, n)) > 0.35
    grid = grid_from_mask(free, 1.0)
    field = distance_transform(grid)
    return grid, build_costmap(field, grid.occupied, wall_weight=float(rng.uniform(0, 8))), field


def corridor_costmap(width=20, height=5):
    free = np.zeros((height, width), dtype=bool)
    free[2, 1:-1] = True
    grid = grid_from_mask(free, 1.0)
    field = distance_transform(grid)
    return grid, build_costmap(field, grid.occupied, wall_weight=0.0), field


class TestPlanCenterline:
    def test_start_equals_goal(self):
        _, cm, field = corridor_costmap()
        p = plan_centerline(cm, field, np.array([5.5, 2.5]), np.array([5.5, 2.5]))
        assert len(p) == 1
        assert p.arc_length == 0.0
        assert p.cost == 0.0

    def test_straight_corridor_is_straight(self):
        _, cm, field = corridor_costmap()
        p = plan_centerline(cm, field, np.array([1.5, 2.5]), np.array([18.5, 2.5]))
        assert (p.waypoints[:, 1] == 2.5).all()
        assert p.arc_length == pytest.approx(17.0)

    def test_consecutive_waypoints_are_8_neighbors(self, tree_layout):
        field = distance_transform(tree_layout.grid)
        cm = build_costmap(field, tree_layout.grid.occupied)
        p = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[-1])
        steps = np.hypot(*np.diff(p.waypoints, axis=0).T)
        assert (steps <= SQ2 * tree_layout.grid.resolution + 1e-9).all()

    def test_waypoints_on_free_cells(self, tree_layout):
        grid = tree_layout.grid
        field = distance_transform(grid)
        cm = build_costmap(field, grid.occupied)
        p = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[0])
        for wp in p.waypoints:
            assert grid.is_free(wp)
            assert field.sample(wp) > 0

    @pytest.mark.parametrize("seed", range(15))
    def test_cost_matches_dijkstra_exactly(self, seed):
        rng = np.random.default_rng(seed)
        grid, cm, field = random_costmap(rng)
        free_cells = np.argwhere(~grid.occupied)
        sr, sc = free_cells[rng.integers(len(free_cells))]
        gr, gc = free_cells[rng.integers(len(free_cells))]
        start = grid.cell_center(sr, sc)
        goal = grid.cell_center(gr, gc)
        oracle = dijkstra_cost(cm, (sr, sc), (gr, gc))
        if math.isinf(oracle):
            with pytest.raises(NoPathError):
                plan_centerline(cm, field, start, goal)
            return
        p = plan_centerline(cm, field, start, goal)
        assert p.cost == oracle  # exact float equality

    def test_blocked_endpoint(self):
        grid, cm, field = corridor_costmap()
        with pytest.raises(BlockedEndpointError):
            plan_centerline(cm, field, np.array([0.5, 0.5]), np.array([5.5, 2.5]))

    def test_disconnected_components(self):
        free = np.zeros((5, 9), dtype=bool)
        free[2, 1:3] = True
        free[2, 6:8] = True
        grid = grid_from_mask(free, 1.0)
        field = distance_transform(grid)
        cm = build_costmap(field, grid.occupied)
        with pytest.raises(NoPathError):
            plan_centerline(cm, field, np.array([1.5, 2.5]), np.array([6.5, 2.5]))

    def test_deterministic_output(self, tree_layout):
        field = distance_transform(tree_layout.grid)
        cm = build_costmap(field, tree_layout.grid.occupied)
        p1 = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[1])
        p2 = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[1])
        assert (p1.waypoints == p2.waypoints).all()


# ---------------------------------------------------------------------------
# rigid-rod tip derivation
# ---------------------------------------------------------------------------


def straight_path(length=20.0, step=1.0):
    n = int(length / step) + 1
    wp = np.column_stack([np.arange(n) * step + 0.5, np.full(n, 2.5)])
    return Path(
        waypoints=wp,
        branch_flags=np.zeros(n, dtype=bool),
        arc_length=float(length),
        cost=0.0,
    )


def corner_path(leg=10.0):
    """Two 10 mm legs meeting at a right angle."""
    first = [(float(i), 0.0) for i in range(int(leg) + 1)]
    second = [(leg, float(j)) for j in range(1, int(leg) + 1)]
    wp = np.array(first + second)
    return Path(
        waypoints=wp,
        branch_flags=np.zeros(len(wp), dtype=bool),
        arc_length=2 * leg,
        cost=0.0,
    )


def chord_point_bisection(path: Path, head, L):
    """Oracle: bisection on arc length u for |P(u) - head| = L."""
    arcs = path.arc_at
    g = lambda u: float(np.hypot(*(path.point_at_arc(u) - head)))
    head_arc = None
    # locate head's arc by dense scan (oracle can be slow)
    us = np.linspace(0, arcs[-1], 20001)
    head_arc = us[np.argmin([g(u) for u in us])]
    lo, hi = 0.0, head_arc
    # find bracket walking back from the head
    u = head_arc
    while u > 0 and g(u) < L:
        u -= 1e-3
    lo = max(u, 0.0)
    if g(lo) < L:
        return None
    hi = head_arc
    # bisection: g(lo) >= L, g decreases toward hi (locally)
    for _ in range(200):
        mid = (lo + hi) / 2
        if g(mid) >= L:
            lo = mid
        else:
            hi = mid
    return path.point_at_arc((lo + hi) / 2)


class TestDeriveTipWaypoints:
    def test_straight_path_tail_trails_by_rod_length(self, tree_grid):
        p = straight_path()
        plan = derive_tip_waypoints(p, 4.0, tree_grid, step_mm=0.5)
        for head, tail in zip(plan.head_waypoints, plan.tail_waypoints):
            assert head[0] - tail[0] == pytest.approx(4.0, abs=1e-9)
            assert tail[1] == pytest.approx(head[1], abs=1e-12)

    def test_rod_length_zero_rejected(self, tree_grid):
        with pytest.raises(InvalidParamsError):
            derive_tip_waypoints(straight_path(), 0.0, tree_grid)

    def test_path_shorter_than_rod(self, tree_grid):
        with pytest.raises(PathTooShortError):
            derive_tip_waypoints(straight_path(length=3.0), 4.0, tree_grid)

    def test_corner_chord_matches_bisection_oracle(self, tree_grid):
        p = corner_path()
        L = 4.0
        plan = derive_tip_waypoints(p, L, tree_grid, step_mm=0.5)
        arcs = plan.source.arc_at
        # head 2 mm past the corner: arc = 10 + 2 = 12
        k = int(np.argmin(np.abs(np.array([12.0]) - np.arange(L, 20.0 + 0.5, 0.5))))
        heads = plan.head_waypoints
        idx = int(np.argmin(np.hypot(heads[:, 0] - 10.0, heads[:, 1] - 2.0)))
        head = heads[idx]
        tail = plan.tail_waypoints[idx]
        assert np.hypot(*(head - tail)) == pytest.approx(L, abs=1e-6)
        # tail must sit on the first leg (y == 0) at chord distance L
        assert tail[1] == pytest.approx(0.0, abs=1e-9)
        assert tail[0] == pytest.approx(10.0 - math.sqrt(L * L - 4.0), abs=1e-6)
        oracle = chord_point_bisection(p, head, L)
        assert oracle is not None
        assert np.hypot(*(tail - oracle)) < 1e-3

    def test_every_index_chord_exact(self, tree_layout):
        grid = tree_layout.grid
        field = distance_transform(grid)
        cm = build_costmap(field, grid.occupied)
        p = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[-1])
        plan = derive_tip_waypoints(p, 4.0, grid)
        gaps = np.hypot(*(plan.head_waypoints - plan.tail_waypoints).T)
        assert np.abs(gaps - 4.0).max() < 1e-6

    def test_head_reaches_path_end(self, tree_layout):
        grid = tree_layout.grid
        field = distance_transform(grid)
        cm = build_costmap(field, grid.occupied)
        p = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[0])
        plan = derive_tip_waypoints(p, 4.0, grid)
        assert np.hypot(*(plan.head_waypoints[-1] - p.waypoints[-1])) < 1e-9

    def test_hairpin_infeasible_chord(self, tree_grid):
        # path doubles back on itself with 1 mm spacing: an 4 mm rod cannot fit
        wp = np.array([[i, 0.0] for i in np.arange(0, 6.0, 0.5)] + [[5.5 - i, 1.0] for i in np.arange(0, 6.0, 0.5)])
        deltas = np.hypot(*np.diff(wp, axis=0).T)
        p = Path(
            waypoints=wp,
            branch_flags=np.zeros(len(wp), dtype=bool),
            arc_length=float(deltas.sum()),
            cost=0.0,
        )
        with pytest.raises(ChordInfeasibleError):
            derive_tip_waypoints(p, 11.0, tree_grid, step_mm=0.25)


class TestArmSeparation:
    def make_plan(self, L):
        p = straight_path()
        return DualArmPlan(
            head_waypoints=np.array([[6.0, 2.5], [7.0, 2.5]]),
            tail_waypoints=np.array([[6.0 - L, 2.5], [7.0 - L, 2.5]]),
            rod_length=L,
            source=p,
        )

    def test_zero_min_sep_always_true(self):
        assert check_arm_separation(self.make_plan(4.0), 0.0, tip_radius=1.5)

    def test_min_sep_above_rod_length_false(self):
        assert not check_arm_separation(self.make_plan(4.0), 4.5, tip_radius=1.5)

    def test_tip_disk_intersection_rule(self):
        # disks of radius r intersect iff separation < 2r
        assert check_arm_separation(self.make_plan(4.0), 0.0, tip_radius=2.0)
        assert not check_arm_separation(self.make_plan(4.0), 0.0, tip_radius=2.1)


class TestPathFollower:
    def make_plan(self):
        p = straight_path()
        heads = np.array([[4.5 + i, 2.5] for i in range(5)])
        tails = heads - np.array([4.0, 0.0])
        return DualArmPlan(head_waypoints=heads, tail_waypoints=tails, rod_length=4.0, source=p)

    def test_on_final_waypoint_zero_velocity(self):
        plan = self.make_plan()
        f = PathFollower(plan, gain=2.0, v_max=10.0)
        f.cursor.head = len(plan) - 1
        f.cursor.tail = len(plan) - 1
        v_head, v_tail = f.command(plan.head_waypoints[-1], plan.tail_waypoints[-1])
        assert np.hypot(*v_head) == 0.0
        assert np.hypot(*v_tail) == 0.0

    def test_proportional_command(self):
        plan = self.make_plan()
        f = PathFollower(plan, gain=2.0, v_max=10.0)
        v_head, _ = f.command(plan.head_waypoints[0] - [1.0, 0.0], plan.tail_waypoints[0])
        assert np.hypot(*v_head) == pytest.approx(2.0, abs=1e-12)
        assert v_head[0] > 0

    def test_saturates_at_v_max(self):
        plan = self.make_plan()
        f = PathFollower(plan, gain=2.0, v_max=10.0)
        v_head, _ = f.command(plan.head_waypoints[0] - [100.0, 0.0], plan.tail_waypoints[0])
        assert np.hypot(*v_head) == pytest.approx(10.0, abs=1e-12)

    def test_cursor_monotone(self):
        plan = self.make_plan()
        f = PathFollower(plan, gain=2.0, v_max=10.0)
        history = []
        pos_h = plan.head_waypoints[0].copy()
        pos_t = plan.tail_waypoints[0].copy()
        for _ in range(200):
            v_h, v_t = f.command(pos_h, pos_t)
            pos_h += v_h * 0.05
            pos_t += v_t * 0.05
            history.append((f.cursor.head, f.cursor.tail))
        assert all(a2 >= a1 and b2 >= b1 for (a1, b1), (a2, b2) in zip(history, history[1:]))
        assert f.done


def test_plan_json_export(tree_layout):
    import json

    grid = tree_layout.grid
    field = distance_transform(grid)
    cm = build_costmap(field, grid.occupied)
    p = plan_centerline(cm, field, tree_layout.inlet, tree_layout.targets[0])
    plan = derive_tip_waypoints(p, 4.0, grid)
    payload = json.loads(plan_to_json(plan))
    assert payload["v"] == 1
    assert len(payload["head_waypoints"]) == len(payload["tail_waypoints"])
    assert len(payload["path"]["waypoints"]) == len(payload["path"]["branch"])
