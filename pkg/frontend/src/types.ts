// Shared wire/API types for the annotation + teleop service.

export interface Pt {
  x: number;
  y: number;
}

export type Condition = "precise" | "misleading";

export interface MapSummary {
  env: string;
  width_m: number;
  height_m: number;
  resolution: number;
  origin: [number, number];
  region_count: number;
}

export interface MapDetail {
  env: string;
  resolution: number;
  origin: [number, number];
  width_cells: number;
  height_cells: number;
  regions: { id: string; kind: string; polygon: [number, number][]; direction_rad?: number }[];
  transform: { px_per_m: number; off_x: number; off_y: number; size: number };
  base_png_b64: string;
}

export interface SketchDraft {
  env: string;
  stroke: Pt[];           // map-pixel points, already simplified
  language: string;
  condition: Condition;
}

export interface DatapointDto {
  id: string;
  environment: string;
  sketch: [number, number][];
  language: string;
  condition: Condition;
  goal: [number, number];
  start_pose: [number, number, number];
  fd_sketch_demo: number | null;
  [key: string]: unknown;
}

export type SubmitResult =
  | { ok: true; datapoint: DatapointDto }
  | { ok: false; status: number; error: string; segmentIndex: number; message: string };

// server -> client teleop frame
export interface TeleopFrame {
  tick: number;
  t: number;
  pose: [number, number, number];
  v: number;
  omega: number;
  collisions: number;
  status: string;
  canvas_png_b64?: string;
  front_view_png_b64?: string;
}

export interface TeleopFinal {
  done: true;
  fd_sketch_demo: number | null;
  demo_length_m: number;
  duration_s: number;
  degenerate: boolean;
  collisions: number;
}

export type ConnectionState = "connecting" | "open" | "reconnecting" | "closed";
