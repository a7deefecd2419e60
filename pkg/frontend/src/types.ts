// Shapes of the mission-service API (see API.md in the repo root).

export type SessionState =
  | "idle"
  | "planning"
  | "running"
  | "intervention"
  | "paused"
  | "finished"
  | "faulted";

export interface SessionSummary {
  session_id: string;
  state: SessionState;
  has_world: boolean;
  has_graph: boolean;
  has_plan: boolean;
  seq: number;
  clock: string;
}

export interface PlanResponse {
  session_id: string;
  length: number;
  vertices: number;
  path: number[][];
  target_indices: number[];
}

export interface MetricsDoc {
  length_m: number;
  duration_s: number;
  gas_detections: { t: number; species: number; value: number; position: number[] }[];
  interventions: number;
  intervention_time_s: number;
  rad: number;
  autonomy_rate: number;
  terminal: string;
}

export interface LogEvent {
  t: number;
  type: string;
  [key: string]: unknown;
}

export interface TickMessage {
  seq: number;
  type: "tick";
  t: number | null;
  events: LogEvent[];
}

export interface SnapshotMessage {
  type: "snapshot";
  seq: number;
  state: SessionState;
  session: SessionSummary;
  graph?: { nodes: Record<string, number[]>; edges: string[][] };
  path?: { enu: number[][]; length: number; target_indices: number[] };
  trajectory?: number[][];
  true_trajectory?: number[][];
  gas_markers?: { t: number; amu: number; value: number; position: number[] }[];
  interventions?: number[][];
  open_intervention_since?: number | null;
  clock?: number;
  metrics?: Partial<MetricsDoc>;
  rasters?: Record<string, string>;
}

export interface GapMessage {
  type: "gap";
  seq: number;
}

export type TelemetryMessage = SnapshotMessage | TickMessage | GapMessage;

export interface GasMarker {
  t: number;
  amu: number;
  value: number;
  east: number;
  north: number;
}

export interface PoseSample {
  t: number;
  east: number;
  north: number;
  yaw: number;
}
