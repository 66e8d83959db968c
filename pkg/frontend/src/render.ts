/**
 * Canvas rendering of the operator console. Draw functions depend only on a
 * minimal 2D-context interface so tests can run them against a recording
 * stub; the browser passes a real CanvasRenderingContext2D.
 */

import type { SceneFrame, SnapshotFrame, Vec2 } from "./protocol.js";
import { unpackCostHeat, unpackOccupancy } from "./protocol.js";
import type { Camera } from "./transform.js";
import { toPx } from "./transform.js";
import type { ViewState } from "./state.js";
import { isStale } from "./state.js";

/** Subset of CanvasRenderingContext2D the renderer uses. */
export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export const FORCE_PX_PER_N = 30; // arrow length scale
export const ALPHA_MAX = 0.9;

/** Authority gauge model: the value IS the snapshot alpha, untransformed. */
export function gaugeModel(snapshot: SnapshotFrame): {
  left: number;
  right: number;
  leftFraction: number;
  rightFraction: number;
  label: string;
} {
  const [l, r] = snapshot.alpha;
  return {
    left: l,
    right: r,
    leftFraction: l / ALPHA_MAX,
    rightFraction: r / ALPHA_MAX,
    label: l === 0 && r === 0 ? "manual" : "shared",
  };
}

export interface SceneLayers {
  occupied: Uint8Array;
  heat: Uint8Array;
  width: number;
  height: number;
}

export function decodeSceneLayers(scene: SceneFrame): SceneLayers {
  return {
    occupied: unpackOccupancy(scene.grid.occupied_b64, scene.grid.width, scene.grid.height),
    heat: unpackCostHeat(scene.grid.cost_u8_b64, scene.grid.width, scene.grid.height),
    width: scene.grid.width,
    height: scene.grid.height,
  };
}

export function drawPhantom(
  ctx: Ctx2D,
  cam: Camera,
  scene: SceneFrame,
  layers: SceneLayers,
  showCostmap: boolean,
): void {
  const res = scene.grid.resolution_mm;
  const cell = res * cam.scale + 0.5; // slight overlap hides raster seams
  for (let r = 0; r < layers.height; r++) {
    for (let c = 0; c < layers.width; c++) {
      const idx = r * layers.width + c;
      const [x, y] = toPx(cam, [c * res, (r + 1) * res]);
      if (layers.occupied[idx]) {
        ctx.fillStyle = "#2b2b33";
        ctx.fillRect(x, y, cell, cell);
      } else if (showCostmap) {
        const heat = layers.heat[idx];
        ctx.fillStyle = `rgb(${40 + heat * 0.6}, ${60 - heat * 0.1}, ${120 - heat * 0.4})`;
        ctx.fillRect(x, y, cell, cell);
      } else {
        ctx.fillStyle = "#10202c";
        ctx.fillRect(x, y, cell, cell);
      }
    }
  }
}

export function drawPolyline(ctx: Ctx2D, cam: Camera, points: Vec2[], style: string, width = 1.5): void {
  if (points.length < 2) return;
  ctx.strokeStyle = style;
  ctx.lineWidth = width;
  ctx.beginPath();
  const [x0, y0] = toPx(cam, points[0]);
  ctx.moveTo(x0, y0);
  for (let i = 1; i < points.length; i++) {
    const [x, y] = toPx(cam, points[i]);
    ctx.lineTo(x, y);
  }
  ctx.stroke();
}

function drawDisk(ctx: Ctx2D, cam: Camera, center: Vec2, radiusMm: number, style: string): void {
  const [x, y] = toPx(cam, center);
  ctx.fillStyle = style;
  ctx.beginPath();
  ctx.arc(x, y, Math.max(radiusMm * cam.scale, 2), 0, 2 * Math.PI);
  ctx.fill();
}

export function drawForceArrow(ctx: Ctx2D, cam: Camera, origin: Vec2, forceN: Vec2): void {
  const mag = Math.hypot(forceN[0], forceN[1]);
  if (mag < 1e-4) return;
  const [x0, y0] = toPx(cam, origin);
  const dx = forceN[0] * FORCE_PX_PER_N;
  const dy = (cam.flipY ? -1 : 1) * forceN[1] * FORCE_PX_PER_N;
  ctx.strokeStyle = "#ffcc44";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x0 + dx, y0 + dy);
  ctx.stroke();
  ctx.fillStyle = "#ffcc44";
  ctx.beginPath();
  ctx.arc(x0 + dx, y0 + dy, 3, 0, 2 * Math.PI);
  ctx.fill();
}

export function drawAlphaGauge(
  ctx: Ctx2D,
  x: number,
  y: number,
  w: number,
  h: number,
  value: number,
  title: string,
): void {
  ctx.fillStyle = "#1a1a22";
  ctx.fillRect(x, y, w, h);
  ctx.fillStyle = value === 0 ? "#5f6a72" : "#4fa3ff";
  ctx.fillRect(x, y, w * (value / ALPHA_MAX), h);
  ctx.strokeStyle = "#e05555"; // authority ceiling: operator keeps >= 10%
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x + w, y - 2);
  ctx.lineTo(x + w, y + h + 2);
  ctx.stroke();
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, w, h);
  ctx.fillStyle = "#ddd";
  ctx.font = "12px monospace";
  ctx.fillText(`${title} ${value.toFixed(3)}`, x, y - 4);
}

export function drawFrame(
  ctx: Ctx2D,
  cam: Camera,
  view: ViewState,
  layers: SceneLayers | null,
  canvasW: number,
  canvasH: number,
  nowMs: number,
): void {
  const scene = view.scene;
  const snap = view.snapshot;
  ctx.clearRect(0, 0, canvasW, canvasH);
  if (!scene || !layers) {
    ctx.fillStyle = "#ccc";
    ctx.font = "14px monospace";
    ctx.fillText("waiting for scene...", 20, 30);
    return;
  }
  drawPhantom(ctx, cam, scene, layers, view.showCostmap);
  drawPolyline(ctx, cam, scene.plan.path.waypoints, "#3fae6a", 1.5);
  drawDisk(ctx, cam, scene.goal, scene.goal_radius_mm, "#59d98f");

  if (snap) {
    // skip frames with missing data rather than crash mid-draw
    drawPolyline(ctx, cam, [snap.head, snap.tail], "#f2f2f2", 3);
    drawDisk(ctx, cam, snap.head, 0.6, "#ff6b6b"); // head glyph
    drawDisk(ctx, cam, snap.tail, 0.6, "#6bb8ff"); // tail glyph
    drawDisk(ctx, cam, snap.tip_left, scene.tip_radius_mm, "rgba(255,107,107,0.25)");
    drawDisk(ctx, cam, snap.tip_right, scene.tip_radius_mm, "rgba(107,184,255,0.25)");
    drawForceArrow(ctx, cam, snap.head, snap.haptic[0]);
    drawForceArrow(ctx, cam, snap.tail, snap.haptic[1]);

    const g = gaugeModel(snap);
    drawAlphaGauge(ctx, 20, 20, 140, 12, g.left, "alpha L");
    drawAlphaGauge(ctx, 20, 52, 140, 12, g.right, "alpha R");
    ctx.fillStyle = "#ddd";
    ctx.font = "12px monospace";
    ctx.fillText(g.label, 170, 32);
    ctx.fillText(
      `CT ${snap.metrics.ct_s.toFixed(1)}s  CC ${snap.metrics.cc}  policy ${snap.policy}`,
      20,
      84,
    );

    if (view.frameIndex < view.contactFlashUntilFrame) {
      ctx.globalAlpha = 0.25;
      ctx.fillStyle = "#ff3333"; // wall-contact flash
      ctx.fillRect(0, 0, canvasW, canvasH);
      ctx.globalAlpha = 1.0;
    }
  }

  if (isStale(view, nowMs)) {
    ctx.fillStyle = "#b33";
    ctx.fillRect(0, 0, canvasW, 24);
    ctx.fillStyle = "#fff";
    ctx.font = "13px monospace";
    ctx.fillText("connection stale: no snapshots", 10, 16);
  }
  if (view.endStatus) {
    ctx.fillStyle = "#ddd";
    ctx.font = "16px monospace";
    ctx.fillText(`trial ${view.endStatus}`, canvasW / 2 - 60, 30);
  }
}
