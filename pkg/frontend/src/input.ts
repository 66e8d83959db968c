/**
 * Operator input capture: pointer drag is a rate command (drag vector maps
 * linearly to velocity, clamped to the operator speed limit), WASD / arrow
 * keys are a fallback, and the grip slider (or holding Shift) sets the
 * synthetic grip force between the calibrated baseline and override. One
 * input frame is emitted per animation frame.
 */

import type { InputFrame, Vec2 } from "./protocol.js";
import { makeInputFrame } from "./protocol.js";
import type { Camera } from "./transform.js";
import { dragToVelocity } from "./transform.js";
import type { InputMode } from "./state.js";

export const DRAG_FULL_SCALE_PX = 80; // drag length mapping to full speed

export interface InputSourceState {
  dragActive: boolean;
  dragStart: Vec2;
  dragNow: Vec2;
  keys: Set<string>;
  gripFraction: number; // 0 = baseline, 1 = override (slider)
  shiftHeld: boolean;
}

export function initialInputState(): InputSourceState {
  return {
    dragActive: false,
    dragStart: [0, 0],
    dragNow: [0, 0],
    keys: new Set(),
    gripFraction: 0,
    shiftHeld: false,
  };
}

const KEY_VECTORS: Record<string, Vec2> = {
  w: [0, 1],
  s: [0, -1],
  a: [-1, 0],
  d: [1, 0],
  ArrowUp: [0, 1],
  ArrowDown: [0, -1],
  ArrowLeft: [-1, 0],
  ArrowRight: [1, 0],
};

function keyVelocity(keys: Set<string>, vMax: number): Vec2 {
  let x = 0;
  let y = 0;
  for (const k of keys) {
    const v = KEY_VECTORS[k];
    if (v) {
      x += v[0];
      y += v[1];
    }
  }
  const mag = Math.hypot(x, y);
  if (mag === 0) return [0, 0];
  return [(x / mag) * vMax, (y / mag) * vMax];
}

/** Velocity commanded by the active pointer/keyboard state, clamped. */
export function commandedVelocity(src: InputSourceState, cam: Camera, vMax: number): Vec2 {
  if (src.dragActive) {
    const drag: Vec2 = [src.dragNow[0] - src.dragStart[0], src.dragNow[1] - src.dragStart[1]];
    return dragToVelocity(cam, drag, DRAG_FULL_SCALE_PX, vMax);
  }
  return keyVelocity(src.keys, vMax);
}

/** Grip force between baseline and override from the slider / modifier key. */
export function gripForce(
  src: InputSourceState,
  baseline: number,
  override: number,
): number {
  const fraction = src.shiftHeld ? 1 : Math.min(Math.max(src.gripFraction, 0), 1);
  return baseline + fraction * (override - baseline);
}

/** Build the per-animation-frame input frame for the current mode. */
export function buildInputFrame(
  src: InputSourceState,
  cam: Camera,
  mode: InputMode,
  vMax: number,
  baseline: number,
  override: number,
): InputFrame {
  const v = commandedVelocity(src, cam, vMax);
  const grip = gripForce(src, baseline, override);
  const zero: Vec2 = [0, 0];
  if (mode === "left-arm") return makeInputFrame(v, zero, grip, baseline);
  if (mode === "right-arm") return makeInputFrame(zero, v, baseline, grip);
  return makeInputFrame(v, [...v] as Vec2, grip, grip); // both-linked mirror
}
