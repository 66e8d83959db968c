"""Run and batch configuration: plain JSON files parsed into frozen dataclasses.

Unknown keys are rejected with the full key path so typos fail loudly, values
are strictly validated (including dt * v_max < grid resolution, the
no-tunneling condition), and configs round-trip dict -> dataclass -> dict
exactly. The sha256 of the canonical JSON identifies a trial everywhere:
log headers, file names, reports.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import types
import typing
from dataclasses import dataclass, field, fields

from .control import ContextWeights
from .errors import ConfigError
from .haptics import HapticParams
from .phantom import TreeSpec

TIERS = ("easy", "medium", "hard")


@dataclass(frozen=True)
class PhantomConfig:
    source: str = "generated"  # "generated" | "file"
    path: str | None = None  # PGM path when source == "file"
    resolution_mm: float = 0.5
    seed: int = 7
    tree: TreeSpec = field(default_factory=TreeSpec)


@dataclass(frozen=True)
class TaskConfig:
    tier: str | None = "easy"  # preset on the generated phantom
    start: tuple[float, float] | None = None  # explicit start (mm), overrides tier
    goal: tuple[float, float] | None = None


@dataclass(frozen=True)
class PolicyConfig:
    id: str = "context"  # manual | fixed | discrete | context | external
    adapter_host: str = "127.0.0.1"
    adapter_port: int = 7801
    adapter_timeout_ms: float = 50.0


@dataclass(frozen=True)
class OperatorConfig:
    kind: str = "path_follower"  # "path_follower" | "live"
    noise_std: float = 6.0  # mm/s per axis (stationary std)
    noise_corr_s: float = 0.4  # noise correlation time; 0 = white tremor only
    reaction_delay: int = 3  # ticks of input staleness
    grip: str = "relaxed"  # "relaxed" | "override_near_goal"
    grip_dist_mm: float = 5.0  # override trigger distance for override_near_goal
    gain_scale: float = 1.0  # scales the operator's own follow gain
    v_max: float = 14.0  # mm/s clip on commanded speed
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1.0 / 30.0  # s, matches the 30 Hz imaging cadence
    timeout_s: float = 40.0
    tau_m: float = 0.05  # s, first-order lag of the robot toward the tips
    goal_radius_mm: float = 1.0
    rod_length_mm: float = 4.0
    debounce_ticks: int = 10
    tip_radius_mm: float = 1.5  # manipulator tip disk (occlusion + separation)
    workspace_half_mm: float = 10.0  # per-axis half range of each manipulator


@dataclass(frozen=True)
class ControlConfig:
    chunk_size: int = 5
    omega_tau: float = 1.0  # decay constant of the aggregation weights, in chunks
    intent_window: int = 3
    sigma_window: int = 10
    f_baseline_n: float = 1.0
    f_override_n: float = 5.0
    weights: ContextWeights = field(default_factory=ContextWeights)


@dataclass(frozen=True)
class CostmapConfig:
    base: float = 1.0
    wall_weight: float = 10.0
    decay_mm: float = 1.0


@dataclass(frozen=True)
class PlannerConfig:
    gain: float = 4.0  # 1/s proportional follow gain
    v_max: float = 8.0  # mm/s autonomous speed cap
    capture_radius_mm: float = 0.25
    step_mm: float | None = None  # waypoint spacing; default = grid resolution
    replan_on_deviation: bool = False
    deviation_mm: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    haptics: HapticParams = field(default_factory=HapticParams)
    costmap: CostmapConfig = field(default_factory=CostmapConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    seed: int = 0


@dataclass(frozen=True)
class BatchConfig:
    base: RunConfig = field(default_factory=RunConfig)
    conditions: tuple[PolicyConfig, ...] = (
        PolicyConfig(id="manual"),
        PolicyConfig(id="fixed"),
        PolicyConfig(id="discrete"),
        PolicyConfig(id="context"),
    )
    tiers: tuple[str, ...] = TIERS
    seeds: tuple[int, ...] = tuple(range(8))
    parallelism: int = 1


# ---------------------------------------------------------------------------
# strict dict <-> dataclass conversion
# ---------------------------------------------------------------------------


def _convert(value, hint, path: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            if type(None) in typing.get_args(hint):
                return None
            raise ConfigError(f"{path}: null not allowed")
        return _convert(value, args[0], path)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected object, got {type(value).__name__}")
        return from_dict(hint, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected array")
        args = typing.get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"{path}: expected {len(args)} elements, got {len(value)}")
        return tuple(_convert(v, a, f"{path}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected integer, got {value!r}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected boolean, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported config field type {hint}")


def from_dict(cls, data: dict, path: str = "") -> object:
    """Build a config dataclass from a plain dict, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key: {where}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            where = f"{path}.{f.name}" if path else f.name
            kwargs[f.name] = _convert(data[f.name], hints[f.name], where)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from exc


def to_dict(cfg) -> dict:
    """Dataclass tree to plain JSON-safe dict (tuples become lists)."""
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def config_hash(cfg) -> str:
    canon = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# file loading and overrides
# ---------------------------------------------------------------------------


def _set_dotted(data: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted}: {k} is not an object")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed without quotes
    node[keys[-1]] = value


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply key=value overrides with dotted paths, e.g. sim.dt=0.02."""
    out = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        _set_dotted(out, dotted.strip(), raw.strip())
    return out


def validate_run_config(cfg: RunConfig) -> RunConfig:
    """Cross-field checks that individual dataclasses cannot express."""
    res = (
        cfg.phantom.tree.resolution_mm
        if cfg.phantom.source == "generated"
        else cfg.phantom.resolution_mm
    )
    v_max = max(cfg.planner.v_max, cfg.operator.v_max)
    if cfg.sim.dt <= 0:
        raise ConfigError("sim.dt must be > 0")
    if cfg.sim.dt * v_max >= res:
        raise ConfigError(
            f"sim.dt * v_max = {cfg.sim.dt * v_max:.4f} mm must stay below the "
            f"grid resolution {res} mm (no-tunneling condition)"
        )
    if cfg.phantom.source == "file":
        if cfg.phantom.path is None:
            raise ConfigError("phantom.path required when phantom.source == 'file'")
        if cfg.task.tier is not None and (cfg.task.start is None or cfg.task.goal is None):
            raise ConfigError(
                "tier presets exist only on generated phantoms; give task.start/goal"
            )
    elif cfg.phantom.source != "generated":
        raise ConfigError(f"phantom.source must be 'generated' or 'file', got {cfg.phantom.source!r}")
    if cfg.task.tier is not None and cfg.task.tier not in TIERS:
        raise ConfigError(f"task.tier must be one of {TIERS}, got {cfg.task.tier!r}")
    if cfg.task.tier is None and (cfg.task.start is None or cfg.task.goal is None):
        raise ConfigError("need either task.tier or explicit task.start and task.goal")
    if cfg.policy.id not in ("manual", "fixed", "discrete", "context", "external"):
        raise ConfigError(f"unknown policy id {cfg.policy.id!r}")
    if cfg.operator.kind not in ("path_follower", "live"):
        raise ConfigError(f"unknown operator kind {cfg.operator.kind!r}")
    if cfg.operator.grip not in ("relaxed", "override_near_goal"):
        raise ConfigError(f"unknown grip profile {cfg.operator.grip!r}")
    if cfg.control.f_override_n <= cfg.control.f_baseline_n:
        raise ConfigError("control.f_override_n must exceed control.f_baseline_n")
    if not math.isfinite(cfg.sim.timeout_s) or cfg.sim.timeout_s <= 0:
        raise ConfigError("sim.timeout_s must be positive and finite")
    return cfg


def load_run_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if overrides:
        data = apply_overrides(data, overrides)
    cfg = from_dict(RunConfig, data)
    return validate_run_config(cfg)


def load_batch_config(path: str, overrides: list[str] | None = None) -> BatchConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if overrides:
        data = apply_overrides(data, overrides)
    cfg = from_dict(BatchConfig, data)
    validate_run_config(cfg.base)
    if cfg.parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    if not cfg.conditions or not cfg.tiers or not cfg.seeds:
        raise ConfigError("conditions, tiers, and seeds must be non-empty")
    for t in cfg.tiers:
        if t not in TIERS:
            raise ConfigError(f"tiers entries must be in {TIERS}, got {t!r}")
    return cfg
