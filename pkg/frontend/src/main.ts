/**
 * Console wiring: connect to the service, pump input frames once per
 * animation frame, and render the newest snapshot. The receive path writes
 * into a one-slot mailbox, so a slow render can never back-pressure input.
 */

import { buildInputFrame, initialInputState } from "./input.js";
import type { SceneLayers } from "./render.js";
import { decodeSceneLayers, drawFrame } from "./render.js";
import type { InputMode } from "./state.js";
import { applySnapshot, initialViewState } from "./state.js";
import type { Camera } from "./transform.js";
import { fitCamera } from "./transform.js";
import { ServiceClient } from "./net.js";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const statusEl = document.getElementById("status") as HTMLElement;
const gripEl = document.getElementById("grip") as HTMLInputElement;
const modeEl = document.getElementById("mode") as HTMLSelectElement;
const costmapEl = document.getElementById("costmap") as HTMLInputElement;

const view = initialViewState();
const input = initialInputState();
let cam: Camera = fitCamera(30, 30, canvas.width, canvas.height);
let layers: SceneLayers | null = null;

const wsUrl = `ws://${location.host || "127.0.0.1:8765"}/`;
const client = new ServiceClient(wsUrl, {
  onScene(scene) {
    view.scene = scene;
    layers = decodeSceneLayers(scene);
    const wMm = scene.grid.width * scene.grid.resolution_mm;
    const hMm = scene.grid.height * scene.grid.resolution_mm;
    cam = fitCamera(wMm, hMm, canvas.width, canvas.height);
    view.endStatus = null;
  },
  onEnd(end) {
    view.endStatus = `${end.status}${end.success ? " (success)" : ""}`;
  },
  onStatus(status) {
    view.connection = status;
    statusEl.textContent = status;
  },
  onError(message) {
    console.warn("service:", message);
  },
});

for (const [id, frame] of [
  ["btn-start", { type: "start" }],
  ["btn-pause", { type: "pause" }],
  ["btn-reset", { type: "reset" }],
] as const) {
  document.getElementById(id)?.addEventListener("click", () => client.send(frame));
}
document.getElementById("policy")?.addEventListener("change", (ev) => {
  client.send({ type: "set_policy", id: (ev.target as HTMLSelectElement).value });
});

canvas.addEventListener("pointerdown", (ev) => {
  input.dragActive = true;
  input.dragStart = [ev.offsetX, ev.offsetY];
  input.dragNow = [ev.offsetX, ev.offsetY];
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (input.dragActive) input.dragNow = [ev.offsetX, ev.offsetY];
});
for (const evName of ["pointerup", "pointercancel"] as const) {
  canvas.addEventListener(evName, () => {
    input.dragActive = false;
  });
}
window.addEventListener("keydown", (ev) => {
  if (ev.key === "Shift") input.shiftHeld = true;
  else input.keys.add(ev.key);
});
window.addEventListener("keyup", (ev) => {
  if (ev.key === "Shift") input.shiftHeld = false;
  else input.keys.delete(ev.key);
});
gripEl.addEventListener("input", () => {
  input.gripFraction = Number(gripEl.value) / 100;
});
modeEl.addEventListener("change", () => {
  view.inputMode = modeEl.value as InputMode;
});
costmapEl.addEventListener("change", () => {
  view.showCostmap = costmapEl.checked;
});

function pump(): void {
  const now = performance.now();
  const snap = client.snapshots.take();
  if (snap) applySnapshot(view, snap, now);

  if (view.scene && view.connection === "open") {
    const cal = view.scene.calibration;
    client.send(
      buildInputFrame(
        input,
        cam,
        view.inputMode,
        view.scene.operator_v_max,
        cal.f_baseline_n,
        cal.f_override_n,
      ),
    );
  }
  drawFrame(ctx, cam, view, layers, canvas.width, canvas.height, now);
  view.frameIndex += 1;
  requestAnimationFrame(pump);
}

requestAnimationFrame(pump);
