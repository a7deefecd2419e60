// Thin REST client for the mission service.

import type { MetricsDoc, PlanResponse, SessionSummary } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`HTTP ${status}: ${JSON.stringify(body)}`);
  }
}

export class ApiClient {
  constructor(public baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const contentType = res.headers.get("content-type") ?? "";
    const payload = contentType.includes("json") ? await res.json() : await res.text();
    if (!res.ok) throw new ApiError(res.status, payload);
    return payload as T;
  }

  createSession(clock?: string): Promise<SessionSummary> {
    return this.request("POST", "/sessions", clock ? { clock } : {});
  }

  sessionInfo(sid: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${sid}`);
  }

  uploadWorld(sid: string, doc: unknown): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/world`, doc);
  }

  uploadGraph(sid: string, doc: unknown): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/graph`, doc);
  }

  planMission(sid: string, targets: { lat: number; lon: number }[], returnToStart = false): Promise<PlanResponse> {
    return this.request("POST", `/sessions/${sid}/mission`, {
      targets,
      return_to_start: returnToStart,
    });
  }

  start(sid: string, seed = 0, config: Record<string, unknown> = {}): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/start`, { seed, config });
  }

  pause(sid: string): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/pause`);
  }

  resume(sid: string): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/resume`);
  }

  stop(sid: string): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/stop`);
  }

  interveneStart(sid: string, operator = "console"): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/intervene/start`, { operator });
  }

  interveneStop(sid: string, operator = "console"): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/intervene/stop`, { operator });
  }

  teleop(sid: string, vx: number, vy: number, omega: number): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sid}/teleop`, { vx, vy, omega });
  }

  metrics(sid: string): Promise<MetricsDoc> {
    return this.request("GET", `/sessions/${sid}/metrics`);
  }

  async raster(sid: string, name: string): Promise<ArrayBuffer> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions/${sid}/rasters/${name}`);
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return res.arrayBuffer();
  }

  telemetryUrl(sid: string, since?: number): string {
    const ws = this.baseUrl.replace(/^http/, "ws");
    return `${ws}/sessions/${sid}/telemetry${since !== undefined ? `?since=${since}` : ""}`;
  }
}
