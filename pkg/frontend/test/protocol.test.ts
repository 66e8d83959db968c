import { describe, expect, it } from "vitest";

import {
  makeInputFrame,
  unpackOccupancy,
  validateScene,
  validateSnapshot,
} from "../src/protocol.js";

function goodSnapshot(): Record<string, unknown> {
  return {
    type: "snapshot",
    v: 1,
    t: 3,
    head: [1.0, 2.0],
    tail: [1.0, 6.0],
    tip_left: [1.0, 2.0],
    tip_right: [1.0, 6.0],
    alpha: [0.45, 0.3],
    u_human: [[0, 0], [0, 0]],
    u_robot: [[1, 0], [0, 1]],
    u_blended: [[0.45, 0], [0, 0.3]],
    intent: [0, 0],
    haptic: [[0, 0], [0.1, 0]],
    safety: { min_wall_dist: 2.0, occlusion_iou: 1.0, curvature: 0.0, bifurcation_dist: 5.0 },
    events: [],
    running: true,
    policy: "context",
    metrics: { ct_s: 0.1, pl_cm: 0.0, cc: 0, goal_dist_mm: 10 },
    plan_id: "abc",
  };
}

describe("validateSnapshot", () => {
  it("accepts a complete frame", () => {
    expect(validateSnapshot(goodSnapshot())).not.toBeNull();
  });

  it("rejects wrong protocol version", () => {
    expect(validateSnapshot({ ...goodSnapshot(), v: 2 })).toBeNull();
  });

  it.each(["head", "alpha", "u_human", "safety", "metrics", "events"])(
    "rejects a frame missing %s",
    (key) => {
      const frame = goodSnapshot();
      delete frame[key];
      expect(validateSnapshot(frame)).toBeNull();
    },
  );

  it("rejects non-finite positions", () => {
    expect(validateSnapshot({ ...goodSnapshot(), head: [NaN, 0] })).toBeNull();
    expect(validateSnapshot({ ...goodSnapshot(), head: [Infinity, 0] })).toBeNull();
  });

  it("rejects negative or fractional ticks", () => {
    expect(validateSnapshot({ ...goodSnapshot(), t: -1 })).toBeNull();
    expect(validateSnapshot({ ...goodSnapshot(), t: 1.5 })).toBeNull();
  });
});

describe("validateScene", () => {
  const scene = {
    type: "scene",
    v: 1,
    grid: { width: 4, height: 2, resolution_mm: 0.5, occupied_b64: "AA==", cost_u8_b64: "AAAAAAAAAAA=" },
    plan: { head_waypoints: [[0, 0]], tail_waypoints: [[0, 0]], rod_length_mm: 4, path: { waypoints: [], branch: [] } },
    start: [1, 1],
    goal: [2, 2],
    goal_radius_mm: 1,
    rod_length_mm: 4,
    tip_radius_mm: 1.5,
    workspace_half_mm: 10,
    policy: "context",
    alpha_max: 0.9,
    calibration: { f_baseline_n: 1, f_override_n: 5 },
    operator_v_max: 14,
    dt: 0.0333,
    plan_id: "abc",
  };

  it("accepts a complete scene", () => {
    expect(validateScene(scene)).not.toBeNull();
  });

  it("rejects a scene without calibration", () => {
    const { calibration: _omitted, ...rest } = scene;
    expect(validateScene(rest)).toBeNull();
  });
});

describe("unpackOccupancy", () => {
  it("unpacks most-significant-bit-first rows", () => {
    // one byte 0b10100000 -> cells [1, 0, 1, 0, 0, 0, 0, 0]
    const b64 = btoa(String.fromCharCode(0b10100000));
    const bits = unpackOccupancy(b64, 8, 1);
    expect(Array.from(bits)).toEqual([1, 0, 1, 0, 0, 0, 0, 0]);
  });
});

describe("makeInputFrame", () => {
  it("is schema-shaped for arbitrary numeric values", () => {
    const frame = makeInputFrame([1.5, -2], [0, 0], 1.0, 5.0);
    expect(frame.type).toBe("input");
    expect(frame.v_left).toEqual([1.5, -2]);
    expect(frame.fsr_right).toBe(5.0);
    // JSON-serializable in one wire frame
    expect(() => JSON.stringify(frame)).not.toThrow();
  });
});
