"""Quasi-static millirobot simulation and the deterministic trial loop.

Motion model: the viscous regime is overdamped, so manipulator tips integrate
the blended velocity command directly (clamped to their workspace boxes) and
each rod endpoint relaxes toward its tip with a first-order lag. The rigid-rod
constraint is re-imposed every tick by symmetric projection of head and tail
about their midpoint, and endpoints that would enter a wall slide along the
wall tangent, emitting a contact event. There is no restitution.

One trial is one single-threaded loop owning all mutable state; batches run
trials on a process pool with results ordered by input index, so parallelism
never changes the output.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import phantom as ph
from .config import RunConfig, config_hash, to_dict, validate_run_config
from .control import (
    AuthorityPipeline,
    IntentPipeline,
    blend_commands,
    exponential_weights,
    make_policy,
)
from .errors import (
    BlockedEndpointError,
    ChordInfeasibleError,
    InfeasibleTrialError,
    InvalidDtError,
    NoPathError,
    PathTooShortError,
    VesselSimError,
)
from .haptics import combined_haptic, guidance_force, repulsive_force
from .planner import DualArmPlan, Path, PathFollower, derive_tip_waypoints, plan_centerline
from .triallog import (
    STATUS_ABORTED,
    STATUS_REACHED,
    STATUS_TIMEOUT,
    TickRecord,
    TrialLog,
)

ROD_PROJECTION_ITERS = 6


# ---------------------------------------------------------------------------
# state types
# ---------------------------------------------------------------------------


@dataclass
class RobotState:
    """Millirobot as a fixed-length rigid rod: two endpoints in mm."""

    head: np.ndarray
    tail: np.ndarray
    rod_length: float = 4.0

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.head + self.tail)

    def length_error(self) -> float:
        return abs(float(np.hypot(*(self.head - self.tail))) - self.rod_length)


@dataclass
class ManipulatorState:
    """Two manipulator tips, each confined to a per-axis box around its center."""

    tip_left: np.ndarray
    tip_right: np.ndarray
    center_left: np.ndarray
    center_right: np.ndarray
    half_range: float = 10.0

    def clamp(self) -> None:
        np.clip(
            self.tip_left,
            self.center_left - self.half_range,
            self.center_left + self.half_range,
            out=self.tip_left,
        )
        np.clip(
            self.tip_right,
            self.center_right - self.half_range,
            self.center_right + self.half_range,
            out=self.tip_right,
        )


@dataclass
class OperatorInput:
    """Per-arm commanded velocity (mm/s) plus grip force (N) per hand."""

    v_left: np.ndarray
    v_right: np.ndarray
    fsr_left: float
    fsr_right: float

    @classmethod
    def idle(cls, grip: float) -> "OperatorInput":
        return cls(np.zeros(2), np.zeros(2), grip, grip)


@dataclass(frozen=True)
class OperatorModel:
    """Synthetic operator parameters: a noisy, delayed path follower.

    ``noise_corr_s`` > 0 makes the noise an AR(1) drift with that correlation
    time (hand tremor plus slow aim bias); zero keeps it white.
    """

    kind: str = "path_follower"
    noise_std: float = 0.0  # mm/s per axis, stationary std
    noise_corr_s: float = 0.0  # correlation time of the noise process
    reaction_delay: int = 0  # ticks
    grip: str = "relaxed"  # "relaxed" | "override_near_goal"
    grip_dist_mm: float = 5.0
    gain_scale: float = 1.0
    v_max: float = 10.0
    seed: int = 0


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def _project_rod(head: np.ndarray, tail: np.ndarray, length: float, prev_dir: np.ndarray):
    """Symmetric chord projection about the midpoint (no directional bias)."""
    mid = 0.5 * (head + tail)
    d = head - tail
    norm = float(np.hypot(d[0], d[1]))
    u = d / norm if norm > 1e-12 else prev_dir
    half = 0.5 * length * u
    return mid + half, mid - half, u


def _slide_endpoint(grid: ph.OccupancyGrid, prev: np.ndarray, new: np.ndarray):
    """Remove the wall-penetrating component of a move; returns (pos, contact).

    Axis-separated slide: keep the larger displacement component first, so a
    move into a wall continues tangentially along it. Falls back to the
    previous (feasible) position when both single-axis moves are blocked.
    """
    if grid.in_bounds(new) and grid.is_free(new):
        return new, False
    disp = new - prev
    candidates = [np.array([new[0], prev[1]]), np.array([prev[0], new[1]])]
    if abs(disp[1]) > abs(disp[0]):
        candidates.reverse()
    for cand in candidates:
        if grid.in_bounds(cand) and grid.is_free(cand):
            return cand, True
    return prev.copy(), True


def step(
    robot: RobotState,
    tips: ManipulatorState,
    u_blended: tuple[np.ndarray, np.ndarray],
    dt: float,
    grid: ph.OccupancyGrid,
    tau_m: float = 0.05,
) -> tuple[RobotState, ManipulatorState, list[dict]]:
    """Advance one tick; returns new states plus wall-contact events.

    The rod length is exact after every call: the final operation is always the
    chord projection, and if the wall constraints cannot be reconciled with it
    the endpoints revert to their previous (feasible) positions.
    """
    if dt <= 0:
        raise InvalidDtError(f"dt must be > 0, got {dt}")
    new_tips = ManipulatorState(
        tip_left=tips.tip_left + np.asarray(u_blended[0], float) * dt,
        tip_right=tips.tip_right + np.asarray(u_blended[1], float) * dt,
        center_left=tips.center_left,
        center_right=tips.center_right,
        half_range=tips.half_range,
    )
    new_tips.clamp()

    lam = 1.0 - math.exp(-dt / tau_m)
    head0, tail0 = robot.head, robot.tail
    prev_dir = head0 - tail0
    prev_norm = float(np.hypot(prev_dir[0], prev_dir[1]))
    prev_dir = prev_dir / prev_norm if prev_norm > 1e-12 else np.array([1.0, 0.0])

    head = head0 + lam * (new_tips.tip_left - head0)
    tail = tail0 + lam * (new_tips.tip_right - tail0)

    contact_head = False
    contact_tail = False
    for _ in range(ROD_PROJECTION_ITERS):
        head, tail, prev_dir = _project_rod(head, tail, robot.rod_length, prev_dir)
        head2, hit_h = _slide_endpoint(grid, head0, head)
        tail2, hit_t = _slide_endpoint(grid, tail0, tail)
        contact_head |= hit_h
        contact_tail |= hit_t
        moved = float(np.hypot(*(head2 - head))) + float(np.hypot(*(tail2 - tail)))
        head, tail = head2, tail2
        if moved < 1e-12:
            break
    head, tail, prev_dir = _project_rod(head, tail, robot.rod_length, prev_dir)
    if not (
        grid.in_bounds(head)
        and grid.in_bounds(tail)
        and grid.is_free(head)
        and grid.is_free(tail)
    ):
        head, tail = head0.copy(), tail0.copy()  # previous pose is always feasible

    events = []
    if contact_head:
        events.append({"type": "contact", "endpoint": "head"})
    if contact_tail:
        events.append({"type": "contact", "endpoint": "tail"})
    return RobotState(head=head, tail=tail, rod_length=robot.rod_length), new_tips, events


# ---------------------------------------------------------------------------
# wall-contact debouncing
# ---------------------------------------------------------------------------


def detect_wall_contact(events, debounce_window: int = 10) -> int:
    """Debounced collision count: events on the same endpoint closer than the
    window to the previous event continue the same contact."""
    last_tick: dict[str, int] = {}
    count = 0
    for tick, endpoint in events:
        prev = last_tick.get(endpoint)
        if prev is None or tick - prev > debounce_window:
            count += 1
        last_tick[endpoint] = tick
    return count


class ContactDebouncer:
    """Incremental form of detect_wall_contact for running counts."""

    def __init__(self, debounce_window: int = 10) -> None:
        self.window = debounce_window
        self._last: dict[str, int] = {}
        self.count = 0

    def feed(self, tick: int, endpoint: str) -> None:
        prev = self._last.get(endpoint)
        if prev is None or tick - prev > self.window:
            self.count += 1
        self._last[endpoint] = tick


# ---------------------------------------------------------------------------
# synthetic operator
# ---------------------------------------------------------------------------


class SyntheticOperator:
    """Noisy, delayed path follower standing in for a human participant.

    The emitted command is the follow command computed ``reaction_delay`` ticks
    ago plus zero-mean Gaussian noise per axis, clipped to the operator speed
    limit. The grip profile maps context to an FSR force between the baseline
    and override calibration. Fully deterministic given (model, trial seed).
    """

    def __init__(
        self,
        model: OperatorModel,
        plan: DualArmPlan,
        follow_gain: float,
        f_baseline: float,
        f_override: float,
        capture_radius: float,
        trial_seed: int,
        dt: float = 1.0 / 30.0,
    ) -> None:
        self.model = model
        self.rng = np.random.default_rng([model.seed, trial_seed])
        self.follower = PathFollower(
            plan,
            gain=follow_gain * model.gain_scale,
            v_max=model.v_max,
            capture_radius=capture_radius,
        )
        self.f_baseline = f_baseline
        self.f_override = f_override
        zero = (np.zeros(2), np.zeros(2))
        self._delay_line = [zero] * model.reaction_delay
        # AR(1) noise keeps the stationary per-axis std at noise_std
        self._rho = (
            math.exp(-dt / model.noise_corr_s) if model.noise_corr_s > 0 else 0.0
        )
        self._noise = np.zeros((2, 2))

    def rebind_plan(self, plan: DualArmPlan) -> None:
        """Follow a replanned waypoint sequence; progress restarts on it."""
        self.follower = PathFollower(
            plan,
            gain=self.follower.gain,
            v_max=self.follower.v_max,
            capture_radius=self.follower.capture_radius,
        )

    def _grip(self, goal_dist: float) -> float:
        if self.model.grip == "override_near_goal" and goal_dist < self.model.grip_dist_mm:
            return self.f_override
        return self.f_baseline

    def _next_noise(self) -> np.ndarray:
        innovation = self.rng.normal(0.0, self.model.noise_std, size=(2, 2))
        self._noise = self._rho * self._noise + math.sqrt(1.0 - self._rho**2) * innovation
        return self._noise

    def command(self, tips: ManipulatorState, goal_dist: float) -> OperatorInput:
        fresh = self.follower.command(tips.tip_left, tips.tip_right)
        self._delay_line.append(fresh)
        v_left, v_right = self._delay_line.pop(0)
        noise = self._next_noise()
        out = []
        for arm, v in enumerate((v_left, v_right)):
            noisy = v + noise[arm]
            speed = float(np.hypot(noisy[0], noisy[1]))
            if speed > self.model.v_max:
                noisy *= self.model.v_max / speed
            out.append(noisy)
        grip = self._grip(goal_dist)
        return OperatorInput(v_left=out[0], v_right=out[1], fsr_left=grip, fsr_right=grip)


# ---------------------------------------------------------------------------
# trial session
# ---------------------------------------------------------------------------


@dataclass
class TrialScene:
    """Everything static a trial (or the live service) needs."""

    grid: ph.OccupancyGrid
    field: ph.DistanceField
    costmap: ph.CostMap
    path: Path
    plan: DualArmPlan
    start: np.ndarray
    goal: np.ndarray
    tier: str | None


def build_scene(cfg: RunConfig) -> TrialScene:
    """Load/generate the phantom, resolve the task endpoints, and plan."""
    pc = cfg.phantom
    if pc.source == "generated":
        layout = ph.generate_tree_layout(pc.tree, pc.seed)
        grid = layout.grid
        presets = {
            "easy": layout.targets[0] if layout.targets else None,
            "medium": layout.targets[min(1, len(layout.targets) - 1)],
            "hard": layout.targets[-1],
        }
        if cfg.task.start is not None and cfg.task.goal is not None:
            start = np.asarray(cfg.task.start, float)
            goal = np.asarray(cfg.task.goal, float)
        else:
            start = layout.inlet
            goal = presets[cfg.task.tier]
    else:
        with open(pc.path, "rb") as fh:
            grid = ph.load_grid(fh.read(), pc.resolution_mm)
        start = np.asarray(cfg.task.start, float)
        goal = np.asarray(cfg.task.goal, float)

    field = ph.distance_transform(grid)
    costmap = ph.build_costmap(
        field,
        grid.occupied,
        base=cfg.costmap.base,
        wall_weight=cfg.costmap.wall_weight,
        decay_mm=cfg.costmap.decay_mm,
    )
    L = cfg.sim.rod_length_mm
    try:
        path = plan_centerline(costmap, field, start, goal)
    except (NoPathError, BlockedEndpointError) as exc:
        raise InfeasibleTrialError(str(exc)) from exc

    if path.arc_length < L:
        if float(np.hypot(*(goal - start))) <= cfg.sim.goal_radius_mm:
            plan = _degenerate_plan(grid, field, start, L, path)
        else:
            raise InfeasibleTrialError(
                f"centerline arc {path.arc_length:.2f} mm shorter than the rod"
            )
    else:
        try:
            plan = derive_tip_waypoints(path, L, grid, cfg.planner.step_mm)
        except PathTooShortError as exc:
            raise InfeasibleTrialError(str(exc)) from exc
    gaps = np.hypot(*(plan.head_waypoints - plan.tail_waypoints).T)
    if (gaps < 2 * cfg.sim.tip_radius_mm - 1e-9).any():
        raise InfeasibleTrialError("manipulator tip disks would overlap on this plan")
    return TrialScene(
        grid=grid,
        field=field,
        costmap=costmap,
        path=path,
        plan=plan,
        start=start,
        goal=goal,
        tier=cfg.task.tier,
    )


def _degenerate_plan(grid, field, start, L, path) -> DualArmPlan:
    """Rod placement for a start-at-goal trial: scan directions for a free tail."""
    for k in range(16):
        ang = 2 * math.pi * k / 16
        tail = start + L * np.array([math.cos(ang), math.sin(ang)])
        pts = ph.rod_sample_points(start, tail, grid.resolution)
        if all(grid.in_bounds(p) and grid.is_free(p) for p in pts):
            return DualArmPlan(
                head_waypoints=np.array([start]),
                tail_waypoints=np.array([tail]),
                rod_length=L,
                source=path,
            )
    raise InfeasibleTrialError("no free direction to place the rod at the start")


class TrialSession:
    """One trial's control loop; tick() consumes one operator input.

    Tick order: intent pipeline -> policy chunk -> aggregation -> operator
    override -> autonomous follow command -> blending -> haptic rendering ->
    physics step -> safety snapshot -> log record. The safety snapshot consumed
    by the policy is the one produced at the end of the previous tick.
    """

    def __init__(self, cfg: RunConfig, scene: TrialScene | None = None) -> None:
        validate_run_config(cfg)
        self.cfg = cfg
        self.scene = scene if scene is not None else build_scene(cfg)
        sc = self.scene

        head0 = sc.plan.head_waypoints[0].copy()
        tail0 = sc.plan.tail_waypoints[0].copy()
        self.robot = RobotState(head=head0, tail=tail0, rod_length=cfg.sim.rod_length_mm)

        half = cfg.sim.workspace_half_mm
        for name, wp in (("head", sc.plan.head_waypoints), ("tail", sc.plan.tail_waypoints)):
            extent = (wp.max(axis=0) - wp.min(axis=0)) / 2.0
            if (extent > half).any():
                raise InfeasibleTrialError(
                    f"{name} waypoints exceed the +/-{half} mm manipulator workspace"
                )
        center_left = (sc.plan.head_waypoints.max(axis=0) + sc.plan.head_waypoints.min(axis=0)) / 2.0
        center_right = (sc.plan.tail_waypoints.max(axis=0) + sc.plan.tail_waypoints.min(axis=0)) / 2.0
        self.tips = ManipulatorState(
            tip_left=head0.copy(),
            tip_right=tail0.copy(),
            center_left=center_left,
            center_right=center_right,
            half_range=half,
        )

        self.policy = make_policy(
            cfg.policy.id,
            chunk_size=cfg.control.chunk_size,
            weights=cfg.control.weights,
            adapter_host=cfg.policy.adapter_host,
            adapter_port=cfg.policy.adapter_port,
            adapter_timeout_ms=cfg.policy.adapter_timeout_ms,
        )
        omega = exponential_weights(cfg.control.chunk_size, cfg.control.omega_tau)
        self.pipeline = AuthorityPipeline(self.policy, omega)
        self.intent = IntentPipeline(
            f_baseline=cfg.control.f_baseline_n,
            f_override=cfg.control.f_override_n,
            window=cfg.control.intent_window,
            sigma_window=cfg.control.sigma_window,
        )
        self.follower = PathFollower(
            sc.plan,
            gain=cfg.planner.gain,
            v_max=cfg.planner.v_max,
            capture_radius=cfg.planner.capture_radius_mm,
        )
        self.debouncer = ContactDebouncer(cfg.sim.debounce_ticks)
        self.tick_index = 0
        self.max_ticks = max(1, int(round(cfg.sim.timeout_s / cfg.sim.dt)))
        self.status: str | None = None
        self.records: list[TickRecord] = []
        self.pl_mm = 0.0
        self.plan_version = 0
        self._last_replan_tick = -(10**9)
        self._pending_events: list[dict] = []
        self._occluders = lambda: [
            (self.tips.tip_left, cfg.sim.tip_radius_mm),
            (self.tips.tip_right, cfg.sim.tip_radius_mm),
        ]
        self.safety = ph.safety_snapshot(sc.field, self.robot, sc.plan, self._occluders())

    # -- accessors ---------------------------------------------------------

    @property
    def goal_dist(self) -> float:
        return float(np.hypot(*(self.robot.head - self.scene.goal)))

    @property
    def done(self) -> bool:
        return self.status is not None

    def set_policy(self, policy_id: str) -> None:
        """Swap the authority policy mid-session; the chunk buffer restarts."""
        self.policy = make_policy(
            policy_id,
            chunk_size=self.cfg.control.chunk_size,
            weights=self.cfg.control.weights,
            adapter_host=self.cfg.policy.adapter_host,
            adapter_port=self.cfg.policy.adapter_port,
            adapter_timeout_ms=self.cfg.policy.adapter_timeout_ms,
        )
        self.pipeline.reset(self.policy)

    def abort(self) -> None:
        if self.status is None:
            self.status = STATUS_ABORTED

    # -- optional replanning -------------------------------------------------

    REPLAN_COOLDOWN_TICKS = 10

    def _maybe_replan(self) -> bool:
        """Replan from the current pose when the rod has left the corridor.

        Off by default (plan once per trial); enabled by the planner config
        key. Keeps the old plan and logs a warning when replanning fails. The
        manipulator workspace boxes stay where the trial started.
        """
        if not self.cfg.planner.replan_on_deviation:
            return False
        if self.tick_index - self._last_replan_tick < self.REPLAN_COOLDOWN_TICKS:
            return False
        deviation = float(
            np.hypot(
                *_nearest_polyline_deviation(
                    self.scene.plan.head_waypoints, self.robot.head
                )
            )
        )
        if deviation <= self.cfg.planner.deviation_mm:
            return False
        self._last_replan_tick = self.tick_index
        try:
            new_path = plan_centerline(
                self.scene.costmap, self.scene.field, self.robot.tail, self.scene.goal
            )
            new_plan = derive_tip_waypoints(
                new_path, self.cfg.sim.rod_length_mm, self.scene.grid, self.cfg.planner.step_mm
            )
        except (NoPathError, BlockedEndpointError, PathTooShortError, ChordInfeasibleError) as exc:
            self._pending_events.append(
                {"type": "warning", "message": f"replan failed: {exc}"}
            )
            return False
        self.scene = dataclasses.replace(self.scene, path=new_path, plan=new_plan)
        self.follower = PathFollower(
            new_plan,
            gain=self.cfg.planner.gain,
            v_max=self.cfg.planner.v_max,
            capture_radius=self.cfg.planner.capture_radius_mm,
        )
        self._pending_events.append(
            {"type": "replan", "deviation_mm": deviation, "tick": self.tick_index}
        )
        return True

    # -- haptics -----------------------------------------------------------

    def _haptic_for(self, endpoint: np.ndarray, waypoints: np.ndarray, alpha: float) -> np.ndarray:
        hp = self.cfg.haptics
        d = max(self.scene.field.sample(endpoint), 1e-6)
        n_hat = ph.wall_normal(self.scene.field, self.scene.grid, endpoint)
        f_rep = repulsive_force(d, n_hat, hp)
        e = _nearest_polyline_deviation(waypoints, endpoint)
        f_guide = guidance_force(e, hp.k_guide)
        return combined_haptic(f_rep, f_guide, alpha, hp.f_cap_n)

    # -- main loop ---------------------------------------------------------

    def tick(self, op: OperatorInput) -> TickRecord:
        if self.status is not None:
            raise InfeasibleTrialError("session already terminated")
        cfg = self.cfg
        intent_l, intent_r = self.intent.update((op.fsr_left, op.fsr_right), cfg.sim.dt)
        pair = self.pipeline.step(
            self.safety, (intent_l, intent_r), self.goal_dist, self.tick_index
        )
        warnings = self.policy.drain_warnings()
        if self._maybe_replan():
            self.plan_version += 1

        u_robot = self.follower.command(self.tips.tip_left, self.tips.tip_right)
        u_human = (np.asarray(op.v_left, float), np.asarray(op.v_right, float))
        u_blend = blend_commands(pair, u_robot, u_human)

        haptic_left = self._haptic_for(
            self.robot.head, self.scene.plan.head_waypoints, pair.alpha_left
        )
        haptic_right = self._haptic_for(
            self.robot.tail, self.scene.plan.tail_waypoints, pair.alpha_right
        )

        prev_mid = self.robot.midpoint()
        self.robot, self.tips, events = step(
            self.robot, self.tips, u_blend, cfg.sim.dt, self.scene.grid, cfg.sim.tau_m
        )
        self.pl_mm += float(np.hypot(*(self.robot.midpoint() - prev_mid)))
        for e in events:
            self.debouncer.feed(self.tick_index, e["endpoint"])
        all_events = (
            events
            + [{"type": "warning", "message": w} for w in warnings]
            + self._pending_events
        )
        self._pending_events = []

        self.safety = ph.safety_snapshot(
            self.scene.field, self.robot, self.scene.plan, self._occluders()
        )
        record = TickRecord(
            tick=self.tick_index,
            head=tuple(self.robot.head),
            tail=tuple(self.robot.tail),
            tip_left=tuple(self.tips.tip_left),
            tip_right=tuple(self.tips.tip_right),
            alpha=(pair.alpha_left, pair.alpha_right),
            u_human=(tuple(u_human[0]), tuple(u_human[1])),
            u_robot=(tuple(u_robot[0]), tuple(u_robot[1])),
            u_blended=(tuple(u_blend[0]), tuple(u_blend[1])),
            intent=(intent_l.intent_smooth, intent_r.intent_smooth),
            haptic=(tuple(haptic_left), tuple(haptic_right)),
            safety=self.safety,
            events=all_events,
        )
        self.records.append(record)

        if self.goal_dist <= cfg.sim.goal_radius_mm:
            self.status = STATUS_REACHED
        elif self.tick_index + 1 >= self.max_ticks:
            self.status = STATUS_TIMEOUT
        self.tick_index += 1
        return record

    def finalize(self) -> TrialLog:
        if self.status is None:
            raise InfeasibleTrialError("session still running")
        cfg_dict = to_dict(self.cfg)
        return TrialLog(
            config_hash=config_hash(self.cfg),
            config=cfg_dict,
            dt=self.cfg.sim.dt,
            records=self.records,
            status=self.status,
            meta={
                "policy": self.cfg.policy.id,
                "tier": self.scene.tier,
                "start": [float(self.scene.start[0]), float(self.scene.start[1])],
                "goal": [float(self.scene.goal[0]), float(self.scene.goal[1])],
                "grid": {
                    "width": self.scene.grid.width,
                    "height": self.scene.grid.height,
                    "resolution_mm": self.scene.grid.resolution,
                },
            },
        )


def _nearest_polyline_deviation(waypoints: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Vector from pos to the nearest point on a waypoint polyline."""
    if len(waypoints) == 1:
        return waypoints[0] - pos
    a = waypoints[:-1]
    d = waypoints[1:] - a
    seg2 = np.einsum("ij,ij->i", d, d)
    seg2 = np.where(seg2 < 1e-18, 1.0, seg2)
    t = np.clip(((pos - a) * d).sum(axis=1) / seg2, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist2 = ((proj - pos) ** 2).sum(axis=1)
    return proj[int(np.argmin(dist2))] - pos


# ---------------------------------------------------------------------------
# trial and batch entry points
# ---------------------------------------------------------------------------


def make_operator(cfg: RunConfig, scene: TrialScene) -> SyntheticOperator:
    oc = cfg.operator
    model = OperatorModel(
        kind=oc.kind,
        noise_std=oc.noise_std,
        noise_corr_s=oc.noise_corr_s,
        reaction_delay=oc.reaction_delay,
        grip=oc.grip,
        grip_dist_mm=oc.grip_dist_mm,
        gain_scale=oc.gain_scale,
        v_max=oc.v_max,
        seed=oc.seed,
    )
    return SyntheticOperator(
        model,
        scene.plan,
        follow_gain=cfg.planner.gain,
        f_baseline=cfg.control.f_baseline_n,
        f_override=cfg.control.f_override_n,
        capture_radius=cfg.planner.capture_radius_mm,
        trial_seed=cfg.seed,
        dt=cfg.sim.dt,
    )


def run_trial(cfg: RunConfig) -> TrialLog:
    """Execute one synthetic-operator trial to termination. Deterministic."""
    if cfg.operator.kind == "live":
        raise InfeasibleTrialError("live operator requires the serve loop")
    session = TrialSession(cfg)
    operator = make_operator(cfg, session.scene)
    plan_version = session.plan_version
    while not session.done:
        op = operator.command(session.tips, session.goal_dist)
        session.tick(op)
        if session.plan_version != plan_version:
            plan_version = session.plan_version
            operator.rebind_plan(session.scene.plan)
    return session.finalize()


@dataclass
class TrialResult:
    """One batch cell: a finished log or the error that prevented it."""

    index: int
    config: RunConfig
    log: TrialLog | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.log is not None


def _run_cell(args: tuple[int, RunConfig]) -> TrialResult:
    index, cfg = args
    try:
        return TrialResult(index=index, config=cfg, log=run_trial(cfg))
    except VesselSimError as exc:
        return TrialResult(index=index, config=cfg, error=f"{type(exc).__name__}: {exc}")


def run_batch(
    conditions: list[RunConfig],
    seeds: list[int],
    parallelism: int = 1,
) -> list[TrialResult]:
    """Cartesian product of conditions x seeds, ordered by (condition, seed).

    Per-trial failures become error entries without aborting the batch, and the
    result order is fixed by input index regardless of parallelism.
    """
    if not conditions or not seeds:
        raise InfeasibleTrialError("conditions and seeds must be non-empty")
    cells = []
    for ci, cond in enumerate(conditions):
        for si, seed in enumerate(seeds):
            cells.append((ci * len(seeds) + si, replace(cond, seed=seed)))
    if parallelism <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_cell, cells, chunksize=1))
