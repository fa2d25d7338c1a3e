// Shared fakes: a draw-call-recording scene and a scripted transport.

import type { HeatmapPixels } from "../src/heatmap.js";
import type { Frame, WorldInfo } from "../src/protocol.js";
import type { Scene2D } from "../src/renderer.js";

export type DrawCall =
  | { op: "clear" }
  | { op: "fillRect"; x: number; y: number; w: number; h: number; color: string }
  | { op: "strokeRect"; x: number; y: number; w: number; h: number; color: string }
  | { op: "line"; x1: number; y1: number; x2: number; y2: number; color: string }
  | { op: "circle"; x: number; y: number; r: number; color: string }
  | { op: "text"; value: string; x: number; y: number; color: string }
  | { op: "heatmap"; pixels: HeatmapPixels; x: number; y: number; w: number; h: number };

export class RecordingScene implements Scene2D {
  calls: DrawCall[] = [];
  frames: DrawCall[][] = [];

  clear(): void {
    if (this.calls.length) this.frames.push(this.calls);
    this.calls = [];
    this.calls.push({ op: "clear" });
  }
  fillRect(x: number, y: number, w: number, h: number, color: string): void {
    this.calls.push({ op: "fillRect", x, y, w, h, color });
  }
  strokeRect(x: number, y: number, w: number, h: number, color: string): void {
    this.calls.push({ op: "strokeRect", x, y, w, h, color });
  }
  line(x1: number, y1: number, x2: number, y2: number, color: string): void {
    this.calls.push({ op: "line", x1, y1, x2, y2, color });
  }
  circle(x: number, y: number, r: number, color: string): void {
    this.calls.push({ op: "circle", x, y, r, color });
  }
  text(value: string, x: number, y: number, color: string): void {
    this.calls.push({ op: "text", value, x, y, color });
  }
  heatmap(pixels: HeatmapPixels, x: number, y: number, w: number, h: number): void {
    this.calls.push({ op: "heatmap", pixels, x, y, w, h });
  }
}

export class ScriptedTransport {
  sent: string[] = [];
  closed = false;

  send(text: string): void {
    this.sent.push(text);
  }
  close(): void {
    this.closed = true;
  }
  sentInputs(): Array<{ alpha: number; thrust: number; seq: number }> {
    return this.sent.map((t) => JSON.parse(t));
  }
}

export const TEST_WORLD: WorldInfo = {
  laneBoundaries: [-4.5, -1.5, 1.5, 4.5],
  touchpad: [-3.5, 3.5, -0.2, 0],
  groundY: 0,
  dangerZone: [-4.5, 4.5, 0, 1],
  startPosition: [0, 8],
  bounds: [-9, 9, -1, 20],
  vehicleRadius: 0.2,
};

export function makeFrame(partial: Partial<Frame> = {}): Frame {
  return {
    type: "frame",
    t: 0,
    step: 0,
    state: [0, 8, 0, 0, 0, 0],
    events: [],
    obstacle: null,
    overlay: null,
    terminal: false,
    ...partial,
  };
}
