/** WebSocket client: validates inbound frames and retries the connection. */

import { Mailbox } from "./mailbox.js";
import type { EndFrame, InputFrame, SceneFrame, SnapshotFrame } from "./protocol.js";
import { validateScene, validateSnapshot } from "./protocol.js";

export interface NetEvents {
  onScene(scene: SceneFrame): void;
  onEnd(end: EndFrame): void;
  onStatus(status: "connecting" | "open" | "closed"): void;
  onError(message: string): void;
}

export class ServiceClient {
  readonly snapshots = new Mailbox<SnapshotFrame>();
  private ws: WebSocket | null = null;
  private url: string;
  private events: NetEvents;
  private closed = false;

  constructor(url: string, events: NetEvents) {
    this.url = url;
    this.events = events;
    this.connect();
  }

  private connect(): void {
    this.events.onStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => this.events.onStatus("open");
    ws.onmessage = (ev: MessageEvent) => this.handleMessage(String(ev.data));
    ws.onclose = () => {
      this.events.onStatus("closed");
      if (!this.closed) setTimeout(() => this.connect(), 1000);
    };
    ws.onerror = () => this.events.onError("websocket error");
  }

  handleMessage(data: string): void {
    let msg: unknown;
    try {
      msg = JSON.parse(data);
    } catch {
      this.events.onError("unparseable frame");
      return;
    }
    const type = (msg as { type?: string }).type;
    if (type === "snapshot") {
      const snap = validateSnapshot(msg);
      if (snap) this.snapshots.put(snap);
      else this.events.onError("invalid snapshot dropped");
    } else if (type === "scene") {
      const scene = validateScene(msg);
      if (scene) this.events.onScene(scene);
      else this.events.onError("invalid scene dropped");
    } else if (type === "end") {
      this.events.onEnd(msg as EndFrame);
    } else if (type === "error") {
      this.events.onError(String((msg as { message?: string }).message));
    }
    // hello / ack frames need no handling
  }

  send(frame: InputFrame | { type: string; [k: string]: unknown }): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(frame));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
