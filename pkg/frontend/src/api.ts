import type { DatapointDto, MapDetail, MapSummary, Pt, SketchDraft, SubmitResult } from "./types.js";

type FetchLike = typeof fetch;

/** World meters -> letterboxed canvas pixels (matches the server renderer). */
export function worldToPx(map: MapDetail, x: number, y: number): Pt {
  const tf = map.transform;
  return {
    x: tf.off_x + (x - map.origin[0]) * tf.px_per_m,
    y: tf.size - (tf.off_y + (y - map.origin[1]) * tf.px_per_m),
  };
}

/** Canvas pixels -> world meters. */
export function pxToWorld(map: MapDetail, px: number, py: number): Pt {
  const tf = map.transform;
  return {
    x: map.origin[0] + (px - tf.off_x) / tf.px_per_m,
    y: map.origin[1] + (tf.size - py - tf.off_y) / tf.px_per_m,
  };
}

/** Thin typed client over the service REST endpoints. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async getJson(path: string): Promise<any> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new Error(`GET ${path} -> ${resp.status}`);
    return resp.json();
  }

  async getMaps(): Promise<MapSummary[]> {
    return (await this.getJson("/maps")).environments;
  }

  async getMap(env: string): Promise<MapDetail> {
    return this.getJson(`/maps/${env}`);
  }

  async getDatapoint(id: string): Promise<DatapointDto> {
    return this.getJson(`/datapoints/${id}`);
  }

  /** POST the draft; pixel-unit strokes are converted server-side. */
  async submitSketch(draft: SketchDraft): Promise<SubmitResult> {
    const resp = await this.fetchImpl(`${this.baseUrl}/datapoints`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        env: draft.env,
        unit: "pixel",
        sketch: draft.stroke.map((p) => [p.x, p.y]),
        language: draft.language,
        condition: draft.condition,
      }),
    });
    if (resp.status === 201) {
      const body = await resp.json();
      return { ok: true, datapoint: body.datapoint };
    }
    let detail: any = {};
    try {
      detail = (await resp.json()).detail ?? {};
    } catch {
      // non-JSON error body: keep defaults
    }
    return {
      ok: false,
      status: resp.status,
      error: detail.error ?? "Unknown",
      segmentIndex: detail.segment_index ?? -1,
      message: detail.message ?? "",
    };
  }
}
