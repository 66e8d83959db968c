/**
 * Wire protocol spoken with the simulator service: newline-delimited JSON
 * frames over a WebSocket. Only schema-valid snapshots reach the view; a
 * malformed frame is dropped (and surfaced on the console) rather than drawn.
 */

export const PROTOCOL_VERSION = 1;

export type Vec2 = [number, number];

export interface SafetyInfo {
  min_wall_dist: number;
  occlusion_iou: number;
  curvature: number;
  bifurcation_dist: number;
}

export interface SnapshotFrame {
  type: "snapshot";
  v: number;
  t: number;
  head: Vec2;
  tail: Vec2;
  tip_left: Vec2;
  tip_right: Vec2;
  alpha: [number, number];
  u_human: [Vec2, Vec2];
  u_robot: [Vec2, Vec2];
  u_blended: [Vec2, Vec2];
  intent: [number, number];
  haptic: [Vec2, Vec2];
  safety: SafetyInfo;
  events: { type: string; [k: string]: unknown }[];
  running: boolean;
  policy: string;
  metrics: { ct_s: number; pl_cm: number; cc: number; goal_dist_mm: number };
  plan_id: string;
}

export interface SceneFrame {
  type: "scene";
  v: number;
  grid: {
    width: number;
    height: number;
    resolution_mm: number;
    occupied_b64: string;
    cost_u8_b64: string;
  };
  plan: {
    head_waypoints: Vec2[];
    tail_waypoints: Vec2[];
    rod_length_mm: number;
    path: { waypoints: Vec2[]; branch: boolean[] };
  };
  start: Vec2;
  goal: Vec2;
  goal_radius_mm: number;
  rod_length_mm: number;
  tip_radius_mm: number;
  workspace_half_mm: number;
  policy: string;
  alpha_max: number;
  calibration: { f_baseline_n: number; f_override_n: number };
  operator_v_max: number;
  dt: number;
  plan_id: string;
}

export interface EndFrame {
  type: "end";
  status: string;
  ticks: number;
  metrics?: { CT: number; PL: number; Va: number; CC: number };
  success?: boolean;
}

export interface InputFrame {
  type: "input";
  v_left: Vec2;
  v_right: Vec2;
  fsr_left: number;
  fsr_right: number;
}

export type ServerFrame =
  | SnapshotFrame
  | SceneFrame
  | EndFrame
  | { type: "hello"; v: number }
  | { type: "ack"; action: string }
  | { type: "error"; message: string };

const isVec2 = (x: unknown): x is Vec2 =>
  Array.isArray(x) && x.length === 2 && x.every((v) => typeof v === "number" && isFinite(v));

const isVecPair = (x: unknown): x is [Vec2, Vec2] =>
  Array.isArray(x) && x.length === 2 && x.every(isVec2);

const isNumPair = (x: unknown): x is [number, number] =>
  Array.isArray(x) && x.length === 2 && x.every((v) => typeof v === "number" && isFinite(v));

/** Validate a decoded snapshot frame field by field. */
export function validateSnapshot(msg: unknown): SnapshotFrame | null {
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  if (m.type !== "snapshot" || m.v !== PROTOCOL_VERSION) return null;
  if (typeof m.t !== "number" || !Number.isInteger(m.t) || m.t < 0) return null;
  if (!isVec2(m.head) || !isVec2(m.tail) || !isVec2(m.tip_left) || !isVec2(m.tip_right))
    return null;
  if (!isNumPair(m.alpha) || !isNumPair(m.intent)) return null;
  if (!isVecPair(m.u_human) || !isVecPair(m.u_robot) || !isVecPair(m.u_blended)) return null;
  if (!isVecPair(m.haptic)) return null;
  const s = m.safety as Record<string, unknown> | undefined;
  if (
    !s ||
    typeof s.min_wall_dist !== "number" ||
    typeof s.occlusion_iou !== "number" ||
    typeof s.curvature !== "number" ||
    typeof s.bifurcation_dist !== "number"
  )
    return null;
  if (!Array.isArray(m.events)) return null;
  const metrics = m.metrics as Record<string, unknown> | undefined;
  if (
    !metrics ||
    typeof metrics.ct_s !== "number" ||
    typeof metrics.pl_cm !== "number" ||
    typeof metrics.cc !== "number"
  )
    return null;
  return msg as SnapshotFrame;
}

export function validateScene(msg: unknown): SceneFrame | null {
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  if (m.type !== "scene" || m.v !== PROTOCOL_VERSION) return null;
  const g = m.grid as Record<string, unknown> | undefined;
  if (
    !g ||
    typeof g.width !== "number" ||
    typeof g.height !== "number" ||
    typeof g.resolution_mm !== "number" ||
    typeof g.occupied_b64 !== "string"
  )
    return null;
  const plan = m.plan as Record<string, unknown> | undefined;
  if (!plan || !Array.isArray(plan.head_waypoints) || !Array.isArray(plan.tail_waypoints))
    return null;
  if (!isVec2(m.start) || !isVec2(m.goal)) return null;
  const cal = m.calibration as Record<string, unknown> | undefined;
  if (!cal || typeof cal.f_baseline_n !== "number" || typeof cal.f_override_n !== "number")
    return null;
  return msg as SceneFrame;
}

/** Unpack the base64 bit-packed occupancy mask into a boolean array. */
export function unpackOccupancy(b64: string, width: number, height: number): Uint8Array {
  const raw = atob(b64);
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) {
    const byte = raw.charCodeAt(i >> 3);
    out[i] = (byte >> (7 - (i & 7))) & 1;
  }
  return out;
}

export function unpackCostHeat(b64: string, width: number, height: number): Uint8Array {
  const raw = atob(b64);
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) out[i] = raw.charCodeAt(i);
  return out;
}

export function makeInputFrame(
  vLeft: Vec2,
  vRight: Vec2,
  fsrLeft: number,
  fsrRight: number,
): InputFrame {
  return { type: "input", v_left: vLeft, v_right: vRight, fsr_left: fsrLeft, fsr_right: fsrRight };
}
