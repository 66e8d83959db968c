"""Trial logs: the per-tick evidence stream behind every metric.

Serialized as JSON Lines: one header line carrying the schema version and the
full config (hash included), one line per tick, and one terminal line with the
trial status. Numbers round-trip exactly (repr floats), so a log re-read from
disk scores identically and byte-identical configs yield byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteLogError, SchemaVersionMismatchError
from .phantom import SafetySnapshot

SCHEMA_VERSION = 1

STATUS_REACHED = "reached"
STATUS_TIMEOUT = "timeout"
STATUS_ABORTED = "aborted"


@dataclass
class TickRecord:
    tick: int
    head: tuple[float, float]
    tail: tuple[float, float]
    tip_left: tuple[float, float]
    tip_right: tuple[float, float]
    alpha: tuple[float, float]
    u_human: tuple[tuple[float, float], tuple[float, float]]
    u_robot: tuple[tuple[float, float], tuple[float, float]]
    u_blended: tuple[tuple[float, float], tuple[float, float]]
    intent: tuple[float, float]  # smoothed per hand
    haptic: tuple[tuple[float, float], tuple[float, float]]
    safety: SafetySnapshot
    events: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "t": self.tick,
            "head": list(self.head),
            "tail": list(self.tail),
            "tip_left": list(self.tip_left),
            "tip_right": list(self.tip_right),
            "alpha": list(self.alpha),
            "u_human": [list(v) for v in self.u_human],
            "u_robot": [list(v) for v in self.u_robot],
            "u_blended": [list(v) for v in self.u_blended],
            "intent": list(self.intent),
            "haptic": [list(v) for v in self.haptic],
            "safety": {
                "min_wall_dist": self.safety.min_wall_dist,
                "occlusion_iou": self.safety.occlusion_iou,
                "curvature": self.safety.curvature,
                "bifurcation_dist": self.safety.bifurcation_dist,
            },
            "events": self.events,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TickRecord":
        s = d["safety"]
        return cls(
            tick=d["t"],
            head=tuple(d["head"]),
            tail=tuple(d["tail"]),
            tip_left=tuple(d["tip_left"]),
            tip_right=tuple(d["tip_right"]),
            alpha=tuple(d["alpha"]),
            u_human=tuple(tuple(v) for v in d["u_human"]),
            u_robot=tuple(tuple(v) for v in d["u_robot"]),
            u_blended=tuple(tuple(v) for v in d["u_blended"]),
            intent=tuple(d["intent"]),
            haptic=tuple(tuple(v) for v in d["haptic"]),
            safety=SafetySnapshot(
                min_wall_dist=s["min_wall_dist"],
                occlusion_iou=s["occlusion_iou"],
                curvature=s["curvature"],
                bifurcation_dist=s["bifurcation_dist"],
            ),
            events=list(d.get("events", [])),
        )


@dataclass
class TrialLog:
    config_hash: str
    config: dict  # full config dict, enough to rebuild the scene for replay
    dt: float
    records: list[TickRecord]
    status: str | None = None
    meta: dict = field(default_factory=dict)  # start, goal, tier, policy, grid dims

    @property
    def complete(self) -> bool:
        return self.status is not None and len(self.records) > 0

    def require_complete(self) -> None:
        if not self.complete:
            raise IncompleteLogError(
                f"log incomplete: status={self.status!r}, ticks={len(self.records)}"
            )

    def midpoints(self) -> np.ndarray:
        """Millirobot midpoint trajectory, shape (n, 2) in mm."""
        return np.array(
            [
                (
                    (r.head[0] + r.tail[0]) / 2.0,
                    (r.head[1] + r.tail[1]) / 2.0,
                )
                for r in self.records
            ]
        )

    def contact_events(self) -> list[tuple[int, str]]:
        """(tick, endpoint) pairs for every raw wall-contact event."""
        out = []
        for r in self.records:
            for e in r.events:
                if e.get("type") == "contact":
                    out.append((r.tick, e["endpoint"]))
        return out


def dump_jsonl(log: TrialLog) -> str:
    log.require_complete()
    lines = [
        json.dumps(
            {
                "v": SCHEMA_VERSION,
                "kind": "trial_log",
                "config_hash": log.config_hash,
                "dt": log.dt,
                "meta": log.meta,
                "config": log.config,
            }
        )
    ]
    lines.extend(json.dumps(r.to_dict()) for r in log.records)
    lines.append(json.dumps({"status": log.status, "ticks": len(log.records)}))
    return "\n".join(lines) + "\n"


def load_jsonl(text: str) -> TrialLog:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise IncompleteLogError("empty log file")
    header = json.loads(lines[0])
    if header.get("v") != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"log schema v{header.get('v')} unsupported (expected v{SCHEMA_VERSION})"
        )
    records = []
    status = None
    for ln in lines[1:]:
        d = json.loads(ln)
        if "status" in d:
            status = d["status"]
            break
        records.append(TickRecord.from_dict(d))
    return TrialLog(
        config_hash=header["config_hash"],
        config=header.get("config", {}),
        dt=header["dt"],
        records=records,
        status=status,
        meta=header.get("meta", {}),
    )
