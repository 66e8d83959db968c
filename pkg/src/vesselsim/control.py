"""Authority blending, chunk aggregation, intent pipeline, and policies.

Authority values live in [0, 0.9]: the operator always keeps at least 10%
influence. Policies emit multi-step chunks (C future steps x 2 arms); the
per-tick authority is the exponentially weighted combination of the last C
chunks' entries that target the current tick, which stays a convex combination
even during warm-up (weights renormalized over the chunks present).

Policies hold private mutable state and are confined to one trial's control
loop; run one instance per trial.
"""

from __future__ import annotations

import json
import math
import socket
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphaOutOfRangeError,
    AdapterTimeoutError,
    DegenerateCalibrationError,
    EmptyBufferError,
    InvalidParamsError,
    MalformedReplyError,
)
from .phantom import SafetySnapshot

ALPHA_MAX = 0.9
DEFAULT_CHUNK_SIZE = 5
DISCRETE_ALPHA_NAV = 0.7
DISCRETE_SWITCH_MM = 5.0
FIXED_ALPHA = 0.5


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuthorityPair:
    """Per-arm authority (left = head arm, right = tail arm), each in [0, 0.9]."""

    alpha_left: float
    alpha_right: float

    def __post_init__(self) -> None:
        for a in (self.alpha_left, self.alpha_right):
            if not 0.0 <= a <= ALPHA_MAX:
                raise AlphaOutOfRangeError(f"alpha {a} outside [0, {ALPHA_MAX}]")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha_left, self.alpha_right])


@dataclass(frozen=True)
class AuthorityChunk:
    """C-step-ahead authority forecast, shape (C, 2): [future step, arm]."""

    values: np.ndarray
    issued_at: int

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 1:
            raise InvalidParamsError(f"chunk must be (C, 2) with C >= 1, got {v.shape}")
        if (v < 0.0).any() or (v > ALPHA_MAX).any():
            raise AlphaOutOfRangeError("chunk entry outside [0, 0.9]")
        v.setflags(write=False)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def constant_chunk(alpha: float, size: int, tick: int) -> AuthorityChunk:
    return AuthorityChunk(values=np.full((size, 2), alpha), issued_at=tick)


class ChunkBuffer:
    """Ring of the last C chunks keyed by issue tick (strictly increasing)."""

    def __init__(self, size: int) -> None:
        if size < 1:
            raise InvalidParamsError("buffer size must be >= 1")
        self.size = size
        self._chunks: deque[AuthorityChunk] = deque(maxlen=size)

    def push(self, chunk: AuthorityChunk) -> None:
        if self._chunks and chunk.issued_at <= self._chunks[-1].issued_at:
            raise InvalidParamsError(
                f"issue tick {chunk.issued_at} not after {self._chunks[-1].issued_at}"
            )
        self._chunks.append(chunk)

    def __len__(self) -> int:
        return len(self._chunks)

    def chunk_issued_at(self, tick: int) -> AuthorityChunk | None:
        for ch in self._chunks:
            if ch.issued_at == tick:
                return ch
        return None

    @property
    def latest_tick(self) -> int:
        if not self._chunks:
            raise EmptyBufferError("no chunks issued yet")
        return self._chunks[-1].issued_at


# ---------------------------------------------------------------------------
# blending and aggregation
# ---------------------------------------------------------------------------


def blend_commands(
    alpha: AuthorityPair,
    u_robot: tuple[np.ndarray, np.ndarray],
    u_human: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Convex per-arm mix of autonomous and human commands.

    Computed as human + alpha * (robot - human): algebraically identical to
    alpha*robot + (1-alpha)*human, reproduces the human command bit-exactly at
    alpha = 0, and can never leave the interval spanned by the two inputs.
    """
    out = []
    for a, ur, uh in zip(
        (alpha.alpha_left, alpha.alpha_right), u_robot, u_human, strict=True
    ):
        ur = np.asarray(ur, dtype=float)
        uh = np.asarray(uh, dtype=float)
        if a == 0.0:
            out.append(uh.copy())
        else:
            out.append(uh + a * (ur - uh))
    return out[0], out[1]


def bound_alpha(logit: float) -> float:
    """Squash a real logit into [0, 0.9) via a scaled logistic."""
    if logit >= 0:
        return ALPHA_MAX / (1.0 + math.exp(-logit))
    e = math.exp(logit)
    return ALPHA_MAX * e / (1.0 + e)


def exponential_weights(size: int, tau: float) -> np.ndarray:
    """Strictly decreasing weights w_k proportional to exp(-k/tau), summing to 1."""
    if size < 1:
        raise InvalidParamsError(f"need size >= 1, got {size}")
    if tau <= 0:
        raise InvalidParamsError(f"need tau > 0, got {tau}")
    w = np.exp(-np.arange(size, dtype=float) / tau)
    return w / w.sum()


def aggregate_chunks(buffer: ChunkBuffer, omega: np.ndarray) -> AuthorityPair:
    """Combine overlapping chunk predictions targeting the current tick.

    Chunk issued k ticks ago contributes its k-th entry with weight omega[k].
    During warm-up the weights of the chunks actually present are renormalized
    to sum to 1, so the output is always a convex combination of in-range
    entries and stays inside [0, 0.9].
    """
    if len(buffer) == 0:
        raise EmptyBufferError("aggregation requested on an empty buffer")
    if len(omega) != buffer.size:
        raise InvalidParamsError(
            f"weight count {len(omega)} != buffer size {buffer.size}"
        )
    t = buffer.latest_tick
    acc = np.zeros(2)
    total_w = 0.0
    for k in range(buffer.size):
        chunk = buffer.chunk_issued_at(t - k)
        if chunk is None or k >= chunk.size:
            continue
        acc += omega[k] * chunk.values[k]
        total_w += float(omega[k])
    if total_w <= 0.0:
        raise EmptyBufferError("no chunk covers the current tick")
    alpha = acc / total_w
    alpha = np.clip(alpha, 0.0, ALPHA_MAX)  # guard float dust at the boundaries
    return AuthorityPair(alpha_left=float(alpha[0]), alpha_right=float(alpha[1]))


def chunk_smoothness_penalty(chunk: AuthorityChunk) -> float:
    """Sum of squared steps between consecutive in-chunk predictions, both arms.

    Zero for single-step chunks and for constant chunks; used to score how
    abrupt a forecast is.
    """
    if chunk.size < 2:
        return 0.0
    diffs = np.diff(chunk.values, axis=0)
    return float((diffs * diffs).sum())


# ---------------------------------------------------------------------------
# grip-force intent pipeline
# ---------------------------------------------------------------------------


def normalize_intent(f: float, f_baseline: float, f_override: float) -> float:
    """Map grip force onto [0, 1] between the calibrated baseline and override."""
    if f_override <= f_baseline:
        raise DegenerateCalibrationError(
            f"override {f_override} N must exceed baseline {f_baseline} N"
        )
    return min(max((f - f_baseline) / (f_override - f_baseline), 0.0), 1.0)


def smooth_intent(history) -> float:
    """Arithmetic mean of the supplied window of normalized intent samples."""
    vals = list(history)
    if not vals:
        raise InvalidParamsError("empty intent history")
    return float(sum(vals) / len(vals))


@dataclass(frozen=True)
class IntentSignal:
    """One hand's grip state: raw force, normalized and smoothed intent, and
    the (force, derivative, spread) feature triple."""

    raw_force: float
    intent: float  # normalized, clamped to [0, 1]
    intent_smooth: float  # sliding-window mean, in [0, 1]
    features: tuple[float, float, float]  # (F, dF/dt, sigma)


class IntentPipeline:
    """Per-trial stateful grip processing for both hands.

    Normalizes against the per-user calibration, smooths over ``window``
    samples (average over what is available during warm-up), and maintains the
    force feature triple: raw force, first-difference derivative, and sample
    standard deviation over the last ``sigma_window`` samples.
    """

    def __init__(
        self,
        f_baseline: float,
        f_override: float,
        window: int = 3,
        sigma_window: int = 10,
    ) -> None:
        if window < 1 or sigma_window < 2:
            raise InvalidParamsError("window >= 1 and sigma_window >= 2 required")
        if f_override <= f_baseline:
            raise DegenerateCalibrationError(
                f"override {f_override} N must exceed baseline {f_baseline} N"
            )
        self.f_baseline = f_baseline
        self.f_override = f_override
        self._intent_hist = (deque(maxlen=window), deque(maxlen=window))
        self._force_hist = (deque(maxlen=sigma_window), deque(maxlen=sigma_window))
        self._prev_force = [None, None]

    def update(self, forces: tuple[float, float], dt: float) -> tuple[IntentSignal, IntentSignal]:
        out = []
        for hand, f in enumerate(forces):
            i = normalize_intent(f, self.f_baseline, self.f_override)
            self._intent_hist[hand].append(i)
            i_bar = smooth_intent(self._intent_hist[hand])
            prev = self._prev_force[hand]
            df = 0.0 if prev is None else (f - prev) / dt
            self._prev_force[hand] = f
            self._force_hist[hand].append(f)
            hist = self._force_hist[hand]
            sigma = float(np.std(list(hist), ddof=1)) if len(hist) >= 2 else 0.0
            out.append(
                IntentSignal(
                    raw_force=f, intent=i, intent_smooth=i_bar, features=(f, df, sigma)
                )
            )
        return out[0], out[1]


# ---------------------------------------------------------------------------
# authority policies
# ---------------------------------------------------------------------------


class AuthorityPolicy:
    """Interface: produce an authority chunk per tick from the current context.

    ``intent_override`` marks policies whose final aggregated authority must be
    scaled by (1 - smoothed intent) per arm, so a hard operator grip always
    wins immediately regardless of the chunk history.
    """

    name = "base"
    intent_override = False

    def step(
        self,
        safety: SafetySnapshot,
        intent: tuple[IntentSignal, IntentSignal],
        goal_dist: float,
        tick: int,
    ) -> AuthorityChunk:
        raise NotImplementedError

    def drain_warnings(self) -> list[str]:
        """Warnings produced since the last call (adapter fallbacks etc.)."""
        return []


class ManualPolicy(AuthorityPolicy):
    """No assistance: authority stays at zero (pure teleoperation)."""

    name = "manual"

    def __init__(self, chunk_size: int = DEFAULT_CHUNK_SIZE) -> None:
        self.chunk_size = chunk_size

    def step(self, safety, intent, goal_dist, tick) -> AuthorityChunk:
        return constant_chunk(0.0, self.chunk_size, tick)


class FixedPolicy(AuthorityPolicy):
    """Constant mid-level authority baseline."""

    name = "fixed"

    def __init__(self, chunk_size: int = DEFAULT_CHUNK_SIZE) -> None:
        self.chunk_size = chunk_size

    def step(self, safety, intent, goal_dist, tick) -> AuthorityChunk:
        return constant_chunk(FIXED_ALPHA, self.chunk_size, tick)


class DiscretePolicy(AuthorityPolicy):
    """Hard-switching baseline: 0.7 while navigating, 0 when the goal distance
    falls strictly below 5 mm (at exactly 5 mm it still assists)."""

    name = "discrete"

    def __init__(self, chunk_size: int = DEFAULT_CHUNK_SIZE) -> None:
        self.chunk_size = chunk_size

    def step(self, safety, intent, goal_dist, tick) -> AuthorityChunk:
        if goal_dist < 0:
            raise InvalidParamsError(f"goal distance must be >= 0, got {goal_dist}")
        alpha = 0.0 if goal_dist < DISCRETE_SWITCH_MM else DISCRETE_ALPHA_NAV
        return constant_chunk(alpha, self.chunk_size, tick)


@dataclass(frozen=True)
class ContextWeights:
    """Risk-signal weights of the heuristic context policy.

    The logit is bias + sum of weighted saturating risk terms; the bias is
    negative so a wide, visible, straight channel yields below-neutral
    authority while saturated wall/occlusion risk drives it to the ceiling.
    """

    bias: float = -1.0
    wall: float = 4.0
    wall_scale_mm: float = 2.0
    curvature: float = 1.0
    curvature_scale_mm: float = 2.0
    bifurcation: float = 1.5
    bifurcation_scale_mm: float = 5.0
    occlusion: float = 4.0


class ContextPolicy(AuthorityPolicy):
    """Deterministic stand-in for a learned context-to-authority regressor.

    Maps the safety snapshot onto a risk logit, squashes it into [0, 0.9], and
    scales per arm by (1 - smoothed grip intent) so a deliberate grip hands
    control back to the operator. Chunks are constant over the horizon; the
    temporal smoothing comes from the aggregation stage.
    """

    name = "context"
    intent_override = True

    def __init__(
        self,
        weights: ContextWeights | None = None,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
    ) -> None:
        self.weights = weights or ContextWeights()
        self.chunk_size = chunk_size

    def risk_logit(self, safety: SafetySnapshot) -> float:
        w = self.weights
        g_wall = math.exp(-max(safety.min_wall_dist, 0.0) / w.wall_scale_mm)
        g_bif = math.exp(-max(safety.bifurcation_dist, 0.0) / w.bifurcation_scale_mm)
        curv_norm = min(abs(safety.curvature) * w.curvature_scale_mm, 1.0)
        return (
            w.bias
            + w.wall * g_wall
            + w.curvature * curv_norm
            + w.bifurcation * g_bif
            + w.occlusion * (1.0 - safety.occlusion_iou)
        )

    def step(self, safety, intent, goal_dist, tick) -> AuthorityChunk:
        base = bound_alpha(self.risk_logit(safety))
        per_arm = [base * (1.0 - sig.intent_smooth) for sig in intent]
        values = np.tile(np.array(per_arm), (self.chunk_size, 1))
        return AuthorityChunk(values=values, issued_at=tick)


class ExternalPolicy(AuthorityPolicy):
    """Bridge to an out-of-process authority model over newline-delimited JSON.

    Per tick it sends {tick, safety, intent, goal_dist} and expects
    {"chunk": [[aL, aR] x C]}. A reply violating the schema or the [0, 0.9]
    bound raises MalformedReply; a timeout falls back to the fixed baseline
    chunk and queues a warning for the trial log.
    """

    name = "external"

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 7801,
        timeout_ms: float = 50.0,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
    ) -> None:
        self.chunk_size = chunk_size
        self.timeout_s = timeout_ms / 1000.0
        self._warnings: list[str] = []
        try:
            self._sock = socket.create_connection((host, port), timeout=self.timeout_s)
        except OSError as exc:
            raise AdapterTimeoutError(f"adapter at {host}:{port} unreachable: {exc}") from exc
        self._sock.settimeout(self.timeout_s)
        self._rx = self._sock.makefile("r", encoding="utf-8")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def drain_warnings(self) -> list[str]:
        out = self._warnings
        self._warnings = []
        return out

    def _parse_reply(self, line: str, tick: int) -> AuthorityChunk:
        try:
            msg = json.loads(line)
            values = np.asarray(msg["chunk"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedReplyError(f"unparseable adapter reply: {exc}") from exc
        if values.ndim != 2 or values.shape[1] != 2:
            raise MalformedReplyError(f"chunk shape {values.shape} is not (C, 2)")
        if (values < 0.0).any() or (values > ALPHA_MAX).any():
            raise MalformedReplyError("chunk entry outside [0, 0.9]")
        return AuthorityChunk(values=values, issued_at=tick)

    def step(self, safety, intent, goal_dist, tick) -> AuthorityChunk:
        request = {
            "tick": tick,
            "safety": {
                "d_min": safety.min_wall_dist,
                "iou": safety.occlusion_iou,
                "curvature": safety.curvature,
                "bifurcation_dist": safety.bifurcation_dist,
            },
            "intent": [
                {"f": s.features[0], "df": s.features[1], "sigma": s.features[2]}
                for s in intent
            ],
            "goal_dist": goal_dist,
        }
        try:
            self._sock.sendall((json.dumps(request) + "\n").encode("utf-8"))
            line = self._rx.readline()
        except OSError:
            line = ""
        if not line:
            self._warnings.append(f"adapter timeout at tick {tick}; fell back to fixed")
            return constant_chunk(FIXED_ALPHA, self.chunk_size, tick)
        return self._parse_reply(line, tick)


def make_policy(
    policy_id: str,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    weights: ContextWeights | None = None,
    adapter_host: str = "127.0.0.1",
    adapter_port: int = 7801,
    adapter_timeout_ms: float = 50.0,
) -> AuthorityPolicy:
    """Instantiate a policy by id: manual, fixed, discrete, context, external."""
    if policy_id == "manual":
        return ManualPolicy(chunk_size)
    if policy_id == "fixed":
        return FixedPolicy(chunk_size)
    if policy_id == "discrete":
        return DiscretePolicy(chunk_size)
    if policy_id == "context":
        return ContextPolicy(weights, chunk_size)
    if policy_id == "external":
        return ExternalPolicy(adapter_host, adapter_port, adapter_timeout_ms, chunk_size)
    raise InvalidParamsError(f"unknown policy id {policy_id!r}")


class AuthorityPipeline:
    """Per-trial chunk buffer + aggregation + operator-override stage.

    step() pushes the policy chunk, aggregates it against the exponential
    weights, and (for policies that request it) scales the aggregate per arm by
    (1 - smoothed intent) so full grip yields exactly zero autonomous authority
    on the very tick the smoothed intent reaches one.
    """

    def __init__(self, policy: AuthorityPolicy, omega: np.ndarray) -> None:
        self.policy = policy
        self.omega = omega
        self.buffer = ChunkBuffer(len(omega))

    def reset(self, policy: AuthorityPolicy | None = None) -> None:
        if policy is not None:
            self.policy = policy
        self.buffer = ChunkBuffer(len(self.omega))

    def step(
        self,
        safety: SafetySnapshot,
        intent: tuple[IntentSignal, IntentSignal],
        goal_dist: float,
        tick: int,
    ) -> AuthorityPair:
        chunk = self.policy.step(safety, intent, goal_dist, tick)
        self.buffer.push(chunk)
        pair = aggregate_chunks(self.buffer, self.omega)
        if self.policy.intent_override:
            pair = AuthorityPair(
                alpha_left=pair.alpha_left * (1.0 - intent[0].intent_smooth),
                alpha_right=pair.alpha_right * (1.0 - intent[1].intent_smooth),
            )
        return pair
