// Console view model, derived exclusively from received telemetry.
// No client-side simulation: everything here is a fold over the snapshot
// plus tick bundles, so a page reload that re-syncs from a fresh snapshot
// reconstructs the identical scene.

import type {
  GasMarker,
  LogEvent,
  MetricsDoc,
  PoseSample,
  SessionState,
  SnapshotMessage,
  TelemetryMessage,
  TickMessage,
} from "./types.js";

export interface LiveMetrics {
  durationS: number;
  interventions: number;
  interventionTimeS: number;
  rad: number;
  autonomyRate: number;
  terminal: string;
}

export class ConsoleStore {
  state: SessionState = "idle";
  seq = 0;
  graph: { nodes: Record<string, number[]>; edges: string[][] } | null = null;
  path: number[][] = [];
  targetIndices: number[] = [];
  trajectory: PoseSample[] = [];
  trueTrajectory: PoseSample[] = [];
  gasMarkers: GasMarker[] = [];
  gasSeries = new Map<number, { t: number; value: number }[]>();
  goal: number[] | null = null;
  lookahead: number | null = null;
  rasters: Record<string, string> = {};
  intervals: [number, number][] = [];
  openInterventionAt: number | null = null;
  clock = 0;
  startT = 0;
  terminal = "live";
  targetsReached: number[] = [];
  notices: string[] = [];
  gapped = false;

  get metrics(): LiveMetrics {
    const total = Math.max(this.clock - this.startT, 0);
    const closed = this.intervals.reduce((acc, [a, b]) => acc + (b - a), 0);
    const open = this.openInterventionAt !== null ? this.clock - this.openInterventionAt : 0;
    const tInt = closed + open;
    const k = this.intervals.length + (this.openInterventionAt !== null ? 1 : 0);
    let rad = 0;
    if (k > 0) {
      const ie = tInt / k;
      // autonomous segments around the interventions (lead-in and tail included)
      const bounds: number[] = [this.startT];
      for (const [a, b] of this.intervals) bounds.push(a, b);
      if (this.openInterventionAt !== null) bounds.push(this.openInterventionAt, this.clock);
      bounds.push(this.clock);
      const segments: number[] = [];
      for (let i = 0; i + 1 < bounds.length; i += 2) segments.push(bounds[i + 1] - bounds[i]);
      const nt = segments.reduce((a, b) => a + b, 0) / segments.length;
      rad = ie + nt > 0 ? ie / (ie + nt) : 0;
    }
    return {
      durationS: total,
      interventions: k,
      interventionTimeS: tInt,
      rad,
      autonomyRate: total > 0 ? 100 * (1 - tInt / total) : 100,
      terminal: this.terminal,
    };
  }

  apply(msg: TelemetryMessage): void {
    if (msg.type === "gap") {
      this.gapped = true;
      this.notices.push("telemetry gap: resynchronizing from snapshot");
      return;
    }
    if (msg.type === "snapshot") {
      this.applySnapshot(msg);
      return;
    }
    this.applyTick(msg);
  }

  private applySnapshot(snap: SnapshotMessage): void {
    this.reset();
    this.state = snap.state;
    this.seq = snap.seq;
    this.graph = snap.graph ?? null;
    this.path = snap.path?.enu ?? [];
    this.targetIndices = snap.path?.target_indices ?? [];
    this.rasters = snap.rasters ?? {};
    for (const p of snap.trajectory ?? []) {
      this.trajectory.push({ t: 0, east: p[0], north: p[1], yaw: 0 });
    }
    for (const p of snap.true_trajectory ?? []) {
      this.trueTrajectory.push({ t: 0, east: p[0], north: p[1], yaw: 0 });
    }
    for (const g of snap.gas_markers ?? []) {
      this.pushGas(g.t, g.amu, g.value, g.position);
    }
    for (const [a, b] of snap.interventions ?? []) {
      this.intervals.push([a, b]);
    }
    this.openInterventionAt = snap.open_intervention_since ?? null;
    if (snap.clock !== undefined) this.clock = snap.clock;
    const m = snap.metrics as Partial<MetricsDoc> | undefined;
    if (m?.terminal && m.terminal !== "live") this.terminal = m.terminal;
    this.gapped = false;
  }

  private applyTick(msg: TickMessage): void {
    if (msg.seq <= this.seq) return; // duplicate guard
    this.seq = msg.seq;
    for (const e of msg.events) this.applyEvent(e);
  }

  applyEvent(e: LogEvent): void {
    this.clock = Math.max(this.clock, e.t);
    switch (e.type) {
      case "pose-estimate": {
        const p = e.position as number[];
        this.trajectory.push({ t: e.t, east: p[0], north: p[1], yaw: e.yaw as number });
        break;
      }
      case "true-pose": {
        const p = e.position as number[];
        this.trueTrajectory.push({ t: e.t, east: p[0], north: p[1], yaw: e.yaw as number });
        break;
      }
      case "gas":
        this.pushGas(e.t, e.amu as number, e.value as number, e.position as number[]);
        break;
      case "path-goal":
        this.goal = (e.goal as number[]) ?? null;
        this.lookahead = (e.lookahead as number) ?? null;
        break;
      case "intervention-start":
        this.openInterventionAt = e.t;
        break;
      case "intervention-end":
        if (this.openInterventionAt !== null) {
          this.intervals.push([this.openInterventionAt, e.t]);
          this.openInterventionAt = null;
        }
        break;
      case "state-change":
        this.state = e.state as SessionState;
        break;
      case "target-reached":
        this.targetsReached.push(e.index as number);
        break;
      case "mission-complete":
      case "fault":
      case "timeout":
      case "planning-error":
        this.terminal = e.type;
        break;
      default:
        break;
    }
  }

  private pushGas(t: number, amu: number, value: number, position: number[]): void {
    this.gasMarkers.push({ t, amu, value, east: position[0], north: position[1] });
    let series = this.gasSeries.get(amu);
    if (!series) {
      series = [];
      this.gasSeries.set(amu, series);
    }
    series.push({ t, value });
  }

  reset(): void {
    this.trajectory = [];
    this.trueTrajectory = [];
    this.gasMarkers = [];
    this.gasSeries = new Map();
    this.intervals = [];
    this.openInterventionAt = null;
    this.goal = null;
    this.clock = 0;
    this.startT = 0;
    this.terminal = "live";
    this.targetsReached = [];
    this.gapped = false;
  }

  /** Intervention controls are live only while the robot is in the field. */
  get interventionControlEnabled(): boolean {
    return this.state === "running" || this.state === "intervention";
  }
}
