// Browser entry point: canvas adapter, keyboard wiring, session lifecycle.

import { PilotConsole } from "./console.js";
import type { HeatmapPixels } from "./heatmap.js";
import { createSession, fetchTrial } from "./protocol.js";
import { Renderer, Scene2D } from "./renderer.js";

class CanvasScene implements Scene2D {
  private readonly ctx: CanvasRenderingContext2D;
  private readonly scratch: HTMLCanvasElement;

  constructor(canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.scratch = document.createElement("canvas");
  }

  clear(width: number, height: number): void {
    this.ctx.clearRect(0, 0, width, height);
  }

  fillRect(x: number, y: number, w: number, h: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillRect(x, y, w, h);
  }

  strokeRect(x: number, y: number, w: number, h: number, color: string, width: number): void {
    this.ctx.strokeStyle = color;
    this.ctx.lineWidth = width;
    this.ctx.strokeRect(x, y, w, h);
  }

  line(x1: number, y1: number, x2: number, y2: number, color: string, width: number): void {
    this.ctx.strokeStyle = color;
    this.ctx.lineWidth = width;
    this.ctx.beginPath();
    this.ctx.moveTo(x1, y1);
    this.ctx.lineTo(x2, y2);
    this.ctx.stroke();
  }

  circle(x: number, y: number, r: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.beginPath();
    this.ctx.arc(x, y, r, 0, 2 * Math.PI);
    this.ctx.fill();
  }

  text(value: string, x: number, y: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.font = "14px monospace";
    this.ctx.fillText(value, x, y);
  }

  heatmap(pixels: HeatmapPixels, x: number, y: number, w: number, h: number): void {
    this.scratch.width = pixels.width;
    this.scratch.height = pixels.height;
    const sctx = this.scratch.getContext("2d");
    if (!sctx) return;
    const rgba = new Uint8ClampedArray(pixels.data);
    sctx.putImageData(new ImageData(rgba, pixels.width, pixels.height), 0, 0);
    this.ctx.save();
    // grid rows start at the world's lower edge; canvas y grows downward
    this.ctx.translate(x, y + h);
    this.ctx.scale(1, -1);
    this.ctx.imageSmoothingEnabled = true;
    this.ctx.drawImage(this.scratch, 0, 0, w, h);
    this.ctx.restore();
  }
}

function download(filename: string, content: string, mime: string): void {
  const blob = new Blob([content], { type: mime });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = filename;
  link.click();
  URL.revokeObjectURL(link.href);
}

async function flyOnce(serverUrl: string, canvas: HTMLCanvasElement, status: HTMLElement) {
  const session = await createSession(serverUrl, Math.floor(Math.random() * 1e9));
  const scene = new CanvasScene(canvas);
  const renderer = new Renderer(scene, session.world, {
    widthPx: canvas.width,
    heightPx: canvas.height,
  });
  const consoleCtl = new PilotConsole(renderer);

  const wsUrl = serverUrl.replace(/^http/, "ws") + session.channel;
  const ws = new WebSocket(wsUrl);
  ws.onopen = () => {
    status.textContent = `session ${session.id}: fly with arrow keys`;
    consoleCtl.attach({ send: (text) => ws.send(text), close: () => ws.close() });
  };
  ws.onmessage = (ev) => consoleCtl.onMessage(String(ev.data));
  ws.onclose = () => consoleCtl.onDisconnect();

  window.addEventListener("keydown", (ev) => {
    if (ev.key.startsWith("Arrow")) {
      ev.preventDefault();
      consoleCtl.keyDown(ev.key);
    }
  });
  window.addEventListener("keyup", (ev) => consoleCtl.keyUp(ev.key));

  const endButton = document.getElementById("end") as HTMLButtonElement;
  endButton.onclick = async () => {
    consoleCtl.end();
    await fetch(`${serverUrl}/sessions/${session.id}`, { method: "DELETE" });
    const trial = await fetchTrial(serverUrl, session.id);
    download(trial.filename, trial.csv, "text/csv");
    download(
      trial.filename.replace(/\.csv$/, ".json"),
      JSON.stringify(trial.sidecar, null, 2),
      "application/json",
    );
    status.textContent = `trial saved: ${trial.filename}`;
  };
}

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const status = document.getElementById("status") as HTMLElement;
const serverUrl = (window as unknown as { SERVER_URL?: string }).SERVER_URL
  ?? `${window.location.protocol}//${window.location.hostname}:8000`;
flyOnce(serverUrl, canvas, status).catch((err) => {
  status.textContent = `error: ${err}`;
});
