import type { ConnectionState, TeleopFinal, TeleopFrame } from "./types.js";

export const V_STEP = 0.25;
export const V_MAX = 1.5;
export const V_MIN = 0.0;
export const W_STEP = 0.25;
export const W_MAX = 1.5;
export const COMMAND_RATE_HZ = 10;
export const STALE_FRAME_MS = 500;

export type TeleopKey = "forward" | "back" | "left" | "right" | "stop";

/** Keyboard-stepped command state: arrows step v/omega, space zeroes both. */
export class CommandModel {
  v = 0;
  omega = 0;

  press(key: TeleopKey): void {
    switch (key) {
      case "forward":
        this.v = Math.min(V_MAX, this.v + V_STEP);
        break;
      case "back":
        this.v = Math.max(V_MIN, this.v - V_STEP);
        break;
      case "left":
        this.omega = Math.min(W_MAX, this.omega + W_STEP);
        break;
      case "right":
        this.omega = Math.max(-W_MAX, this.omega - W_STEP);
        break;
      case "stop":
        this.v = 0;
        this.omega = 0;
        break;
    }
  }
}

export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface TeleopOptions {
  /** replay mode stamps commands with a virtual 10 Hz clock, making the
   * session reproducible; live mode is wall-clocked on the server. */
  mode?: "live" | "replay";
  requestImages?: boolean;
  now?: () => number;
}

export interface Hud {
  v: number;             // last server-acknowledged values
  omega: number;
  connection: ConnectionState;
  collisions: number;
  collisionFlash: boolean;
  staleMs: number;
  lastFrameAt: number | null;
  fd: number | null;     // set after the session ends
}

/**
 * Websocket teleop client. The UI never simulates: HUD pose/velocity state
 * comes exclusively from acknowledged server frames.
 */
export class TeleopClient {
  readonly commands = new CommandModel();
  hud: Hud = {
    v: 0, omega: 0, connection: "connecting", collisions: 0,
    collisionFlash: false, staleMs: 0, lastFrameAt: null, fd: null,
  };
  onframe: ((frame: TeleopFrame) => void) | null = null;
  onfinal: ((final: TeleopFinal) => void) | null = null;

  private ws: WsLike | null = null;
  private readonly mode: "live" | "replay";
  private readonly requestImages: boolean;
  private readonly now: () => number;
  private virtualT = 0;
  private endResolve: ((final: TeleopFinal) => void) | null = null;
  private closedByUs = false;

  constructor(
    private readonly baseWsUrl: string,
    private readonly datapointId: string,
    private readonly wsFactory: WsFactory,
    opts: TeleopOptions = {},
  ) {
    this.mode = opts.mode ?? "live";
    this.requestImages = opts.requestImages ?? true;
    this.now = opts.now ?? (() => Date.now());
  }

  private url(): string {
    const render = this.requestImages ? "1" : "0";
    return `${this.baseWsUrl}/teleop/${this.datapointId}?mode=${this.mode}&render=${render}`;
  }

  connect(): void {
    this.closedByUs = false;
    this.hud.connection = this.hud.lastFrameAt === null ? "connecting" : "reconnecting";
    const ws = this.wsFactory(this.url());
    this.ws = ws;
    ws.onopen = () => {
      this.hud.connection = "open";
    };
    ws.onmessage = (ev) => {
      const msg = JSON.parse(String(ev.data));
      if (msg.done) {
        this.hud.fd = msg.fd_sketch_demo;
        this.endResolve?.(msg as TeleopFinal);
        this.onfinal?.(msg as TeleopFinal);
        return;
      }
      const frame = msg as TeleopFrame;
      this.hud.collisionFlash = frame.collisions > this.hud.collisions;
      this.hud.collisions = frame.collisions;
      this.hud.v = frame.v;
      this.hud.omega = frame.omega;
      this.hud.lastFrameAt = this.now();
      this.onframe?.(frame);
    };
    ws.onclose = () => {
      this.ws = null;
      if (!this.closedByUs) this.hud.connection = "reconnecting";
      else this.hud.connection = "closed";
    };
    ws.onerror = () => {
      // onclose follows; the banner state is handled there
    };
  }

  get connected(): boolean {
    return this.hud.connection === "open";
  }

  /** Staleness of the newest frame; beyond STALE_FRAME_MS the HUD warns. */
  updateStaleness(): number {
    this.hud.staleMs = this.hud.lastFrameAt === null ? 0 : this.now() - this.hud.lastFrameAt;
    return this.hud.staleMs;
  }

  press(key: TeleopKey): void {
    this.commands.press(key);
  }

  /** Send the current command; call at COMMAND_RATE_HZ. Suppressed while
   * the connection is down (commands must not pile up for replay). */
  sendCommand(): boolean {
    if (!this.ws || this.hud.connection !== "open") return false;
    const payload: Record<string, number> = { v: this.commands.v, "ω": this.commands.omega };
    if (this.mode === "replay") {
      payload.t = this.virtualT;
      this.virtualT = Math.round((this.virtualT + 1 / COMMAND_RATE_HZ) * 1e6) / 1e6;
    }
    this.ws.send(JSON.stringify(payload));
    return true;
  }

  /** Finish the session; resolves with the server's FD summary. */
  end(): Promise<TeleopFinal> {
    if (!this.ws) return Promise.reject(new Error("not connected"));
    const promise = new Promise<TeleopFinal>((resolve) => {
      this.endResolve = resolve;
    });
    this.ws.send(JSON.stringify({ end: true }));
    return promise;
  }

  close(): void {
    this.closedByUs = true;
    this.ws?.close();
  }
}

/** Map a keyboard event code to a teleop key, or null. */
export function keyFor(code: string): TeleopKey | null {
  switch (code) {
    case "ArrowUp":
      return "forward";
    case "ArrowDown":
      return "back";
    case "ArrowLeft":
      return "left";
    case "ArrowRight":
      return "right";
    case "Space":
      return "stop";
    default:
      return null;
  }
}
