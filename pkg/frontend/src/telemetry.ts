// WebSocket telemetry feed with sequence-tracked resume.
//
// On reconnect the feed asks the service to continue from the last seen
// sequence number; the service either replays the missed messages (no gaps,
// no duplicates) or sends a gap notice followed by a fresh snapshot.

import type { TelemetryMessage } from "./types.js";

type SocketFactory = (url: string) => WebSocket;

export interface FeedHandlers {
  onMessage: (msg: TelemetryMessage) => void;
  onStatus?: (status: "connected" | "reconnecting" | "closed") => void;
  onReconnected?: () => void;
}

export class TelemetryFeed {
  lastSeq = 0;
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 500;
  private everConnected = false;

  constructor(
    private urlFor: (since?: number) => string,
    private handlers: FeedHandlers,
    private socketFactory: SocketFactory = (url) => new WebSocket(url),
    private retryLimitMs = 8000,
  ) {}

  connect(): void {
    this.closed = false;
    const resuming = this.everConnected;
    const url = resuming ? this.urlFor(this.lastSeq) : this.urlFor(undefined);
    const ws = this.socketFactory(url);
    this.ws = ws;

    ws.onopen = () => {
      this.retryMs = 500;
      this.handlers.onStatus?.("connected");
      if (resuming) this.handlers.onReconnected?.();
      this.everConnected = true;
    };
    ws.onmessage = (ev: MessageEvent) => {
      let msg: TelemetryMessage;
      try {
        msg = JSON.parse(typeof ev.data === "string" ? ev.data : String(ev.data));
      } catch {
        return;
      }
      if ("seq" in msg && typeof msg.seq === "number") {
        this.lastSeq = Math.max(this.lastSeq, msg.seq);
      }
      this.handlers.onMessage(msg);
    };
    ws.onclose = () => {
      if (this.closed) {
        this.handlers.onStatus?.("closed");
        return;
      }
      this.handlers.onStatus?.("reconnecting");
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryLimitMs, this.retryMs * 2);
    };
    ws.onerror = () => {
      try {
        ws.close();
      } catch {
        // close() on a connecting socket can throw; the close handler retries
      }
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
