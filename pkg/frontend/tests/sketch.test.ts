import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { SketchCapture } from "../src/sketch.js";

function fakeFetch(status: number, body: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = (async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return {
      ok: status < 400,
      status,
      json: async () => body,
    } as Response;
  }) as typeof fetch;
  return { impl, calls };
}

describe("SketchCapture", () => {
  it("captures, filters jitter, and simplifies on finish", () => {
    const cap = new SketchCapture();
    cap.begin(0, 0);
    for (let i = 1; i <= 100; i++) cap.move(i, 0.2 * Math.sin(i));
    cap.move(100.1, 0.0); // sub-pixel: dropped
    const stroke = cap.finish();
    expect(cap.phase).toBe("ready");
    expect(stroke.length).toBeGreaterThanOrEqual(2);
    expect(stroke.length).toBeLessThan(20);
    expect(stroke[0]).toEqual({ x: 0, y: 0 });
  });

  it("requires two points before a draft exists", () => {
    const cap = new SketchCapture();
    cap.begin(5, 5);
    cap.finish();
    expect(cap.phase).toBe("idle");
    expect(() => cap.draft("office", "", "precise")).toThrow();
  });

  it("submits a draft and records acceptance", async () => {
    const { impl, calls } = fakeFetch(201, { datapoint: { id: "office_p_0042" } });
    const api = new ApiClient("http://svc", impl);
    const cap = new SketchCapture();
    cap.begin(10, 10);
    cap.move(60, 10);
    cap.move(120, 14);
    cap.finish();
    const result = await cap.submit(api, "office", "go east", "precise");
    expect(result.ok).toBe(true);
    expect(cap.phase).toBe("accepted");
    expect(cap.lastDatapointId).toBe("office_p_0042");
    const sent = JSON.parse(String(calls[0].init?.body));
    expect(sent.unit).toBe("pixel");
    expect(sent.condition).toBe("precise");
    expect(sent.sketch.length).toBeGreaterThanOrEqual(2);
  });

  it("surfaces 422 rejections with the offending segment", async () => {
    const { impl } = fakeFetch(422, {
      detail: { error: "ConditionMismatch", segment_index: 1, message: "clips a wall" },
    });
    const api = new ApiClient("http://svc", impl);
    const cap = new SketchCapture();
    cap.begin(0, 0);
    cap.move(50, 0);
    cap.move(50, 80);
    cap.finish();
    const result = await cap.submit(api, "office", "", "precise");
    expect(result.ok).toBe(false);
    expect(cap.phase).toBe("rejected");
    expect(cap.rejectedSegment).toBe(1);
    expect(cap.lastError).toContain("ConditionMismatch");
  });
});
