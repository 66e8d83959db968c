/** Camera transform between workspace millimetres and canvas pixels. */

import type { Vec2 } from "./protocol.js";

export interface Camera {
  scale: number; // px per mm
  offsetX: number; // px
  offsetY: number; // px
  flipY: boolean; // workspace y-up vs canvas y-down
  heightPx: number;
}

/** Fit a width x height mm workspace into a canvas, preserving aspect. */
export function fitCamera(
  widthMm: number,
  heightMm: number,
  canvasW: number,
  canvasH: number,
  margin = 10,
): Camera {
  const scale = Math.min((canvasW - 2 * margin) / widthMm, (canvasH - 2 * margin) / heightMm);
  const offsetX = (canvasW - widthMm * scale) / 2;
  const offsetY = (canvasH - heightMm * scale) / 2;
  return { scale, offsetX, offsetY, flipY: true, heightPx: canvasH };
}

export function toPx(cam: Camera, p: Vec2): Vec2 {
  const x = cam.offsetX + p[0] * cam.scale;
  const y = cam.flipY
    ? cam.heightPx - (cam.offsetY + p[1] * cam.scale)
    : cam.offsetY + p[1] * cam.scale;
  return [x, y];
}

export function toMm(cam: Camera, px: Vec2): Vec2 {
  const x = (px[0] - cam.offsetX) / cam.scale;
  const y = cam.flipY
    ? (cam.heightPx - px[1] - cam.offsetY) / cam.scale
    : (px[1] - cam.offsetY) / cam.scale;
  return [x, y];
}

/** Pixel drag vector to a velocity command in mm/s, clamped to vMax. */
export function dragToVelocity(
  cam: Camera,
  dragPx: Vec2,
  pxPerMaxSpeed: number,
  vMax: number,
): Vec2 {
  const vx = (dragPx[0] / pxPerMaxSpeed) * vMax;
  const vy = ((cam.flipY ? -dragPx[1] : dragPx[1]) / pxPerMaxSpeed) * vMax;
  const speed = Math.hypot(vx, vy);
  if (speed > vMax) {
    const k = vMax / speed;
    return [vx * k, vy * k];
  }
  return [vx, vy];
}
