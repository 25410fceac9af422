import { simplify } from "./simplify.js";
import type { ApiClient } from "./api.js";
import type { Condition, Pt, SketchDraft, SubmitResult } from "./types.js";

export const SIMPLIFY_EPSILON_PX = 2;

export type SketchPhase = "idle" | "drawing" | "ready" | "submitting" | "accepted" | "rejected";

/**
 * Freehand stroke capture state machine. Pointer positions come in map-pixel
 * coordinates; the submitted stroke is Douglas-Peucker simplified at 2 px.
 */
export class SketchCapture {
  phase: SketchPhase = "idle";
  raw: Pt[] = [];
  simplified: Pt[] = [];
  rejectedSegment = -1;
  lastError = "";
  lastDatapointId = "";

  begin(x: number, y: number): void {
    this.phase = "drawing";
    this.raw = [{ x, y }];
    this.simplified = [];
    this.rejectedSegment = -1;
    this.lastError = "";
  }

  move(x: number, y: number): void {
    if (this.phase !== "drawing") return;
    const last = this.raw[this.raw.length - 1];
    // drop sub-pixel jitter
    if (Math.hypot(x - last.x, y - last.y) < 0.7) return;
    this.raw.push({ x, y });
  }

  finish(): Pt[] {
    if (this.phase !== "drawing") return this.simplified;
    this.simplified = simplify(this.raw, SIMPLIFY_EPSILON_PX);
    this.phase = this.simplified.length >= 2 ? "ready" : "idle";
    return this.simplified;
  }

  draft(env: string, language: string, condition: Condition): SketchDraft {
    if (this.phase !== "ready") throw new Error(`no finished stroke (phase=${this.phase})`);
    return { env, stroke: this.simplified, language, condition };
  }

  async submit(api: ApiClient, env: string, language: string, condition: Condition): Promise<SubmitResult> {
    const draft = this.draft(env, language, condition);
    this.phase = "submitting";
    const result = await api.submitSketch(draft);
    if (result.ok) {
      this.phase = "accepted";
      this.lastDatapointId = result.datapoint.id;
    } else {
      this.phase = "rejected";
      this.rejectedSegment = result.segmentIndex;
      this.lastError = `${result.error}: ${result.message}`;
    }
    return result;
  }
}
