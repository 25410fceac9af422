// Browser entry: wires the capture/teleop state machines to the DOM.
// Serve via `canvas-nav serve --dataset ... --ui frontend/` after `npm run build`.

import { ApiClient } from "./api.js";
import { SketchCapture } from "./sketch.js";
import { COMMAND_RATE_HZ, STALE_FRAME_MS, TeleopClient, keyFor } from "./teleop.js";
import type { Condition, MapDetail, Pt } from "./types.js";

const api = new ApiClient("");
const wsBase = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}`;

const el = (id: string) => document.getElementById(id)!;
const mapCanvas = el("map") as HTMLCanvasElement;
const ctx = mapCanvas.getContext("2d")!;
const statusLine = el("status");
const hudLine = el("hud");
const frontImg = el("front") as HTMLImageElement;
const canvasImg = el("canvas-frame") as HTMLImageElement;

let mapDetail: MapDetail | null = null;
let baseImage: HTMLImageElement | null = null;
const capture = new SketchCapture();
let teleop: TeleopClient | null = null;

function setStatus(text: string, kind: "info" | "error" | "ok" = "info"): void {
  statusLine.textContent = text;
  statusLine.className = kind;
}

function redraw(highlightSegment = -1): void {
  if (!baseImage) return;
  ctx.clearRect(0, 0, mapCanvas.width, mapCanvas.height);
  ctx.drawImage(baseImage, 0, 0);
  const stroke = capture.phase === "drawing" ? capture.raw : capture.simplified;
  if (stroke.length >= 2) {
    ctx.lineWidth = 3;
    for (let i = 0; i + 1 < stroke.length; i++) {
      ctx.strokeStyle = i === highlightSegment ? "#ff9900" : "#ff0000";
      ctx.beginPath();
      ctx.moveTo(stroke[i].x, stroke[i].y);
      ctx.lineTo(stroke[i + 1].x, stroke[i + 1].y);
      ctx.stroke();
    }
  }
}

async function loadEnvList(): Promise<void> {
  const maps = await api.getMaps();
  const select = el("env") as HTMLSelectElement;
  select.innerHTML = "";
  for (const m of maps) {
    const opt = document.createElement("option");
    opt.value = m.env;
    opt.textContent = `${m.env} (${m.width_m.toFixed(0)}x${m.height_m.toFixed(0)} m)`;
    select.appendChild(opt);
  }
  select.onchange = () => loadMap(select.value);
  if (maps.length) await loadMap(maps[0].env);
}

async function loadMap(env: string): Promise<void> {
  mapDetail = await api.getMap(env);
  baseImage = new Image();
  baseImage.onload = () => redraw();
  baseImage.src = `data:image/png;base64,${mapDetail.base_png_b64}`;
  setStatus(`loaded ${env}`);
}

function canvasPoint(ev: PointerEvent): Pt {
  const rect = mapCanvas.getBoundingClientRect();
  return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
}

mapCanvas.onpointerdown = (ev) => {
  ev.preventDefault();
  mapCanvas.setPointerCapture(ev.pointerId);
  const p = canvasPoint(ev);
  capture.begin(p.x, p.y);
};
mapCanvas.onpointermove = (ev) => {
  if (capture.phase !== "drawing") return;
  const p = canvasPoint(ev);
  capture.move(p.x, p.y);
  redraw();
};
mapCanvas.onpointerup = (ev) => {
  mapCanvas.releasePointerCapture(ev.pointerId);
  capture.finish();
  redraw();
  setStatus(`stroke captured: ${capture.simplified.length} points`);
};

(el("submit") as HTMLButtonElement).onclick = async () => {
  if (!mapDetail) return;
  const language = (el("language") as HTMLInputElement).value;
  const condition = (document.querySelector("input[name=condition]:checked") as HTMLInputElement)
    .value as Condition;
  try {
    const result = await capture.submit(api, mapDetail.env, language, condition);
    if (result.ok) {
      setStatus(`saved ${result.datapoint.id}`, "ok");
      (el("dp-id") as HTMLInputElement).value = result.datapoint.id;
      redraw();
    } else {
      setStatus(`rejected (${result.error}): ${result.message}`, "error");
      redraw(result.segmentIndex);
    }
  } catch (e) {
    setStatus(`offline: ${e}`, "error");
  }
};

function renderHud(): void {
  if (!teleop) return;
  teleop.updateStaleness();
  const h = teleop.hud;
  const stale = h.staleMs > STALE_FRAME_MS ? " STALE" : "";
  const fd = h.fd !== null ? ` FD=${h.fd.toFixed(2)}m` : "";
  hudLine.textContent =
    `v=${h.v.toFixed(2)} m/s  ω=${h.omega.toFixed(2)} rad/s  ` +
    `[${h.connection}]${stale}  collisions=${h.collisions}${fd}`;
  hudLine.className = h.collisionFlash ? "flash" : "";
}

(el("connect") as HTMLButtonElement).onclick = () => {
  const dpId = (el("dp-id") as HTMLInputElement).value.trim();
  if (!dpId) return;
  teleop?.close();
  teleop = new TeleopClient(wsBase, dpId, (url) => new WebSocket(url) as never);
  teleop.onframe = (frame) => {
    if (frame.front_view_png_b64) frontImg.src = `data:image/png;base64,${frame.front_view_png_b64}`;
    if (frame.canvas_png_b64) canvasImg.src = `data:image/png;base64,${frame.canvas_png_b64}`;
    renderHud();
  };
  teleop.connect();
  setStatus(`teleop connected to ${dpId}`);
};

(el("end") as HTMLButtonElement).onclick = async () => {
  if (!teleop) return;
  const final = await teleop.end();
  setStatus(
    `session done: ${final.demo_length_m.toFixed(2)} m in ${final.duration_s.toFixed(1)} s, ` +
    `FD=${final.fd_sketch_demo?.toFixed(2) ?? "n/a"} m`,
    "ok",
  );
  renderHud();
};

document.addEventListener("keydown", (ev) => {
  const key = keyFor(ev.code);
  if (key && teleop) {
    ev.preventDefault();
    teleop.press(key);
  }
});

setInterval(() => {
  if (teleop) {
    if (teleop.connected) teleop.sendCommand();
    renderHud();
  }
}, 1000 / COMMAND_RATE_HZ);

// auto-reconnect loop: new socket while the banner shows "reconnecting"
setInterval(() => {
  if (teleop && teleop.hud.connection === "reconnecting") teleop.connect();
}, 1000);

loadEnvList().catch((e) => setStatus(`cannot reach service: ${e}`, "error"));
