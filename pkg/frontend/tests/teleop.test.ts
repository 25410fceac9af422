import { describe, expect, it } from "vitest";
import { CommandModel, TeleopClient, keyFor } from "../src/teleop.js";
import type { WsLike } from "../src/teleop.js";

class FakeWs implements WsLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  push(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
}

function frame(overrides: Record<string, unknown> = {}) {
  return {
    tick: 1, t: 0.1, pose: [1, 2, 0], v: 0.25, omega: 0,
    collisions: 0, status: "running", ...overrides,
  };
}

describe("CommandModel", () => {
  it("steps within limits and zeroes on stop", () => {
    const m = new CommandModel();
    for (let i = 0; i < 10; i++) m.press("forward");
    expect(m.v).toBe(1.5); // clamped at v_max
    m.press("back");
    expect(m.v).toBe(1.25);
    for (let i = 0; i < 10; i++) m.press("back");
    expect(m.v).toBe(0); // no reverse
    for (let i = 0; i < 9; i++) m.press("right");
    expect(m.omega).toBe(-1.5);
    m.press("left");
    expect(m.omega).toBe(-1.25);
    m.press("stop");
    expect(m.v).toBe(0);
    expect(m.omega).toBe(0);
  });

  it("five presses plateau at 1.25", () => {
    const m = new CommandModel();
    for (let i = 0; i < 5; i++) m.press("forward");
    expect(m.v).toBe(1.25);
  });

  it("maps arrow and space codes", () => {
    expect(keyFor("ArrowUp")).toBe("forward");
    expect(keyFor("ArrowDown")).toBe("back");
    expect(keyFor("ArrowLeft")).toBe("left");
    expect(keyFor("ArrowRight")).toBe("right");
    expect(keyFor("Space")).toBe("stop");
    expect(keyFor("KeyQ")).toBeNull();
  });
});

describe("TeleopClient", () => {
  function connected(mode: "live" | "replay" = "live") {
    let socket!: FakeWs;
    const client = new TeleopClient("ws://svc", "office_p_0000", (url) => {
      socket = new FakeWs();
      (socket as any).url = url;
      return socket;
    }, { mode, requestImages: false, now: () => 1000 });
    client.connect();
    socket.open();
    return { client, socket };
  }

  it("suppresses commands until the socket opens", () => {
    let socket!: FakeWs;
    const client = new TeleopClient("ws://svc", "dp", (url) => (socket = new FakeWs()), {
      requestImages: false,
    });
    client.connect();
    expect(client.sendCommand()).toBe(false);
    socket.open();
    expect(client.sendCommand()).toBe(true);
  });

  it("hud mirrors acknowledged server values, not local presses", () => {
    const { client, socket } = connected();
    client.press("forward");
    client.press("forward");
    expect(client.hud.v).toBe(0); // nothing acknowledged yet
    socket.push(frame({ v: 0.5 }));
    expect(client.hud.v).toBe(0.5);
  });

  it("sends the unicode omega key on the wire", () => {
    const { client, socket } = connected();
    client.press("left");
    client.sendCommand();
    const sent = JSON.parse(socket.sent[0]);
    expect(sent["ω"]).toBe(0.25);
    expect(sent.v).toBe(0);
  });

  it("replay mode stamps a virtual 10 Hz clock", () => {
    const { client, socket } = connected("replay");
    client.sendCommand();
    client.sendCommand();
    client.sendCommand();
    const stamps = socket.sent.map((s) => JSON.parse(s).t);
    expect(stamps).toEqual([0, 0.1, 0.2]);
    expect((socket as any).url).toContain("mode=replay");
  });

  it("flashes on new collisions", () => {
    const { client, socket } = connected();
    socket.push(frame({ collisions: 0 }));
    expect(client.hud.collisionFlash).toBe(false);
    socket.push(frame({ collisions: 1 }));
    expect(client.hud.collisionFlash).toBe(true);
    socket.push(frame({ collisions: 1 }));
    expect(client.hud.collisionFlash).toBe(false);
  });

  it("reconnect banner after unexpected close; clean close stays closed", () => {
    const { client, socket } = connected();
    socket.onclose?.();
    expect(client.hud.connection).toBe("reconnecting");
    expect(client.sendCommand()).toBe(false); // suppressed while down
    const again = connected();
    again.client.close();
    expect(again.client.hud.connection).toBe("closed");
  });

  it("end() resolves with the final FD summary", async () => {
    const { client, socket } = connected();
    const done = client.end();
    socket.push({ done: true, fd_sketch_demo: 0.21, demo_length_m: 5.0,
                  duration_s: 5.0, degenerate: false, collisions: 0 });
    const final = await done;
    expect(final.fd_sketch_demo).toBe(0.21);
    expect(client.hud.fd).toBe(0.21);
    expect(JSON.parse(socket.sent.at(-1)!)).toEqual({ end: true });
  });

  it("stale frame indicator past 500 ms", () => {
    let nowMs = 1000;
    let socket!: FakeWs;
    const client = new TeleopClient("ws://svc", "dp", () => (socket = new FakeWs()), {
      requestImages: false,
      now: () => nowMs,
    });
    client.connect();
    socket.open();
    socket.push(frame());
    expect(client.updateStaleness()).toBe(0);
    nowMs += 600;
    expect(client.updateStaleness()).toBe(600);
  });
});
