// Console round trip against a scripted service implementing the documented
// protocol: plan -> rendered path, live trajectory and gas markers advance,
// an intervention shifts the autonomy rate by exactly its share, and a page
// reload mid-run reconstructs the scene from snapshot + buffered replay.

import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { ConsoleStore } from "../src/store.js";
import type { LogEvent, SnapshotMessage, TickMessage } from "../src/types.js";

class ScriptedService {
  path = {
    enu: Array.from({ length: 41 }, (_, i) => [i * 0.5, 0, 0]),
    length: 20,
    target_indices: [0, 40],
  };
  buffer: TickMessage[] = [];
  subscribers: ConsoleStore[] = [];
  private seq = 0;
  private t = 0;

  plan(body: { targets: unknown[] }) {
    expect(body.targets.length).toBe(2);
    return {
      path: this.path.enu,
      length: this.path.length,
      vertices: this.path.enu.length,
      target_indices: this.path.target_indices,
    };
  }

  emit(events: LogEvent[]): void {
    const msg: TickMessage = { seq: ++this.seq, type: "tick", t: events[events.length - 1].t, events };
    this.buffer.push(msg);
    for (const s of this.subscribers) s.apply(msg);
  }

  runSegment(seconds: number, operator = false): void {
    for (let k = 0; k < seconds * 10; k++) {
      this.t += 0.1;
      const x = Math.min(this.t * 0.4, 20);
      this.emit([
        { t: this.t, type: "pose-estimate", position: [x, 0, 0], yaw: 0 },
        { t: this.t, type: "true-pose", position: [x, 0.05, 0], yaw: 0 },
        { t: this.t, type: "gas", amu: 4, value: 0.05 + (x > 8 && x < 12 ? 5 : 0), position: [x, 0, 0] },
        { t: this.t, type: "twist-command", vx: 0.4, vy: 0, omega: 0, source: operator ? "operator" : "planner" },
      ]);
    }
  }

  snapshotAt(reference: ConsoleStore): SnapshotMessage {
    return {
      type: "snapshot",
      seq: reference.seq,
      state: reference.state,
      session: {
        session_id: "scripted",
        state: reference.state,
        has_world: true,
        has_graph: true,
        has_plan: true,
        seq: reference.seq,
        clock: "max-speed",
      },
      path: this.path,
      trajectory: reference.trajectory.map((p) => [p.east, p.north, 0]),
      true_trajectory: reference.trueTrajectory.map((p) => [p.east, p.north, 0]),
      gas_markers: reference.gasMarkers.map((g) => ({
        t: g.t,
        amu: g.amu,
        value: g.value,
        position: [g.east, g.north, 0],
      })),
      interventions: reference.intervals.map(([a, b]) => [a, b]),
      open_intervention_since: reference.openInterventionAt,
      clock: reference.clock,
    };
  }
}

describe("console round trip (scripted service)", () => {
  it("plan renders, telemetry advances, intervention shifts AR, reload reconstructs", () => {
    const svc = new ScriptedService();
    const store = new ConsoleStore();
    svc.subscribers.push(store);

    // two targets placed -> plan -> path polyline with >= 2 vertices
    const planned = svc.plan({ targets: [{ lat: 1, lon: 1 }, { lat: 2, lon: 2 }] });
    store.path = planned.path;
    store.targetIndices = planned.target_indices;
    expect(store.path.length).toBeGreaterThanOrEqual(2);

    // mission starts; trajectory and gas markers advance
    svc.emit([{ t: 0, type: "state-change", state: "running" }]);
    svc.runSegment(20);
    expect(store.trajectory.length).toBe(200);
    expect(store.gasMarkers.length).toBe(200);
    expect(store.trajectory[199].east).toBeGreaterThan(store.trajectory[0].east);
    expect(Math.max(...store.gasMarkers.map((g) => g.value))).toBeGreaterThan(1);

    // a 10 s intervention drops AR by exactly its share of mission time
    svc.emit([
      { t: 20, type: "intervention-start", operator: "console" },
      { t: 20, type: "state-change", state: "intervention" },
    ]);
    svc.runSegment(10, true);
    svc.emit([
      { t: 30, type: "intervention-end", operator: "console" },
      { t: 30, type: "state-change", state: "running" },
    ]);
    svc.runSegment(20);
    const m = store.metrics;
    expect(m.durationS).toBeCloseTo(50, 6);
    expect(m.interventionTimeS).toBeCloseTo(10, 6);
    expect(m.autonomyRate).toBeCloseTo(100 * (1 - 10 / 50), 9);

    // reload mid-run: a fresh store syncs from the snapshot taken at the
    // reload point, then replays the rest of the buffer
    const cut = Math.floor(svc.buffer.length * 0.6);
    const preReload = new ConsoleStore();
    preReload.path = planned.path;
    for (const msg of svc.buffer.slice(0, cut)) preReload.apply(msg);
    const reloaded = new ConsoleStore();
    reloaded.apply(svc.snapshotAt(preReload));
    for (const msg of svc.buffer.slice(cut)) reloaded.apply(msg);

    expect(reloaded.trajectory.map((p) => p.east)).toEqual(store.trajectory.map((p) => p.east));
    expect(reloaded.gasMarkers.length).toBe(store.gasMarkers.length);
    expect(reloaded.seq).toBe(store.seq);
    expect(reloaded.metrics.autonomyRate).toBeCloseTo(store.metrics.autonomyRate, 9);
  });
});

describe("api client request shaping", () => {
  it("builds requests and surfaces service errors", async () => {
    const calls: { url: string; init?: RequestInit }[] = [];
    const fakeFetch = (async (url: string, init?: RequestInit) => {
      calls.push({ url, init });
      if (url.endsWith("/mission")) {
        return new Response(JSON.stringify({ error: "validation", detail: "targets 0 and 1 disconnected" }), {
          status: 422,
          headers: { "content-type": "application/json" },
        });
      }
      return new Response(JSON.stringify({ session_id: "x", state: "idle" }), {
        status: 200,
        headers: { "content-type": "application/json" },
      });
    }) as unknown as typeof fetch;

    const api = new ApiClient("http://svc", fakeFetch);
    await api.createSession();
    expect(calls[0].url).toBe("http://svc/sessions");
    await expect(api.planMission("x", [{ lat: 0, lon: 0 }])).rejects.toThrow(/422/);
    expect(api.telemetryUrl("x", 9)).toBe("ws://svc/sessions/x/telemetry?since=9");
  });
});
