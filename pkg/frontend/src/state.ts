/** View state: what the renderer needs, and the staleness rule for the banner. */

import type { SceneFrame, SnapshotFrame } from "./protocol.js";

export type InputMode = "left-arm" | "right-arm" | "both-linked";

export const STALE_TICK_LIMIT = 10; // missed ticks before the stale banner

export interface ViewState {
  scene: SceneFrame | null;
  snapshot: SnapshotFrame | null;
  lastSnapshotAt: number; // ms timestamp of the newest applied snapshot
  connection: "connecting" | "open" | "closed";
  inputMode: InputMode;
  showCostmap: boolean;
  contactFlashUntilFrame: number; // render-frame index the wall flash runs to
  frameIndex: number;
  endStatus: string | null;
}

export function initialViewState(): ViewState {
  return {
    scene: null,
    snapshot: null,
    lastSnapshotAt: 0,
    connection: "connecting",
    inputMode: "both-linked",
    showCostmap: false,
    contactFlashUntilFrame: -1,
    frameIndex: 0,
    endStatus: null,
  };
}

export const CONTACT_FLASH_FRAMES = 10;

/** Apply a validated snapshot; arms the wall flash when a contact arrived. */
export function applySnapshot(view: ViewState, snap: SnapshotFrame, nowMs: number): void {
  view.snapshot = snap;
  view.lastSnapshotAt = nowMs;
  if (snap.events.some((e) => e.type === "contact")) {
    view.contactFlashUntilFrame = view.frameIndex + CONTACT_FLASH_FRAMES;
  }
}

/** True when the connection is open but snapshots stopped arriving. */
export function isStale(view: ViewState, nowMs: number): boolean {
  if (view.connection !== "open" || view.scene === null) return false;
  if (view.snapshot === null) return false;
  const tickMs = view.scene.dt * 1000;
  return nowMs - view.lastSnapshotAt > STALE_TICK_LIMIT * tickMs;
}
