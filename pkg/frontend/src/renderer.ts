// Scene rendering. The renderer is a pure projection of server frames onto
// draw primitives: the vehicle is drawn exactly where the last frame's state
// says, and nowhere else. The Scene2D seam keeps it testable without a DOM.

import { gridToPixels, HeatmapPixels } from "./heatmap.js";
import type { Frame, WorldInfo } from "./protocol.js";

export interface Scene2D {
  clear(width: number, height: number): void;
  fillRect(x: number, y: number, w: number, h: number, color: string): void;
  strokeRect(x: number, y: number, w: number, h: number, color: string, width: number): void;
  line(x1: number, y1: number, x2: number, y2: number, color: string, width: number): void;
  circle(x: number, y: number, r: number, color: string): void;
  text(value: string, x: number, y: number, color: string): void;
  heatmap(pixels: HeatmapPixels, x: number, y: number, w: number, h: number): void;
}

export interface RendererOptions {
  widthPx: number;
  heightPx: number;
  spawnFlashFrames?: number;
}

const COLORS = {
  background: "#10141a",
  lane: "#8a93a5",
  laneCenter: "#58616f",
  touchpad: "#2e7d4f",
  dangerZone: "rgba(200, 40, 40, 0.35)",
  ground: "#c0c6d0",
  obstacle: "#9aa3b0",
  vehicle: "#4fc3f7",
  heading: "#e3f2fd",
  flash: "rgba(255, 235, 59, 0.25)",
  banner: "#ffd54f",
  risk: "#ff8a65",
};

export class Renderer {
  private readonly scene: Scene2D;
  private readonly world: WorldInfo;
  private readonly width: number;
  private readonly height: number;
  private readonly scale: number;
  private flashLeft = 0;
  private readonly flashFrames: number;

  constructor(scene: Scene2D, world: WorldInfo, options: RendererOptions) {
    this.scene = scene;
    this.world = world;
    this.width = options.widthPx;
    this.height = options.heightPx;
    this.flashFrames = options.spawnFlashFrames ?? 12;
    const [x0, x1, y0, y1] = world.bounds;
    this.scale = Math.min(this.width / (x1 - x0), this.height / (y1 - y0));
  }

  toScreen(wx: number, wy: number): [number, number] {
    const [x0, , y0, y1] = this.world.bounds;
    return [(wx - x0) * this.scale, (y1 - wy) * this.scale + 0 * y0];
  }

  /** Render one server frame (or the empty world before the first frame). */
  render(frame: Frame | null, banner: string | null = null): void {
    const s = this.scene;
    s.clear(this.width, this.height);
    s.fillRect(0, 0, this.width, this.height, COLORS.background);

    if (frame?.overlay) {
      const g = frame.overlay.grid;
      const [hx, hy] = this.toScreen(g.x0, g.y1);
      const w = (g.x1 - g.x0) * this.scale;
      const h = (g.y1 - g.y0) * this.scale;
      s.heatmap(gridToPixels(g), hx, hy, w, h);
    }

    this.drawWorld();
    if (frame?.obstacle) {
      this.drawRect(frame.obstacle, COLORS.obstacle, true);
    }
    if (frame && frame.events.includes("obstacleSpawned")) {
      this.flashLeft = this.flashFrames;
    }
    if (this.flashLeft > 0) {
      s.fillRect(0, 0, this.width, this.height, COLORS.flash);
      this.flashLeft -= 1;
    }

    if (frame) {
      this.drawVehicle(frame.state);
      if (frame.overlay) {
        // verbatim passthrough of the server's risk field
        s.text(`risk: ${frame.overlay.risk}`, 12, 22, COLORS.risk);
      }
      s.text(`t=${frame.t.toFixed(2)}s`, 12, this.height - 12, COLORS.lane);
    }
    if (banner) {
      s.text(banner, this.width / 2 - 60, this.height / 2, COLORS.banner);
    }
  }

  private drawWorld(): void {
    const s = this.scene;
    const w = this.world;
    const [, , yLo, yHi] = w.bounds;
    for (let i = 0; i < w.laneBoundaries.length; i++) {
      const x = w.laneBoundaries[i]!;
      const [sx, syTop] = this.toScreen(x, yHi);
      const [, syBot] = this.toScreen(x, yLo);
      const inner = i > 0 && i < w.laneBoundaries.length - 1;
      s.line(sx, syTop, sx, syBot, inner ? COLORS.laneCenter : COLORS.lane, 1);
    }
    this.drawRect(w.dangerZone, COLORS.dangerZone, true);
    this.drawRect(w.touchpad, COLORS.touchpad, true);
    const [gx0, gy] = this.toScreen(w.bounds[0], w.groundY);
    const [gx1] = this.toScreen(w.bounds[1], w.groundY);
    s.line(gx0, gy, gx1, gy, COLORS.ground, 2);
  }

  private drawRect(
    rect: [number, number, number, number],
    color: string,
    fill: boolean,
  ): void {
    const [x0, x1, y0, y1] = rect;
    const [sx, sy] = this.toScreen(x0, y1);
    const w = (x1 - x0) * this.scale;
    const h = (y1 - y0) * this.scale;
    if (fill) this.scene.fillRect(sx, sy, w, h, color);
    else this.scene.strokeRect(sx, sy, w, h, color, 1);
  }

  private drawVehicle(state: number[]): void {
    const [px, py, theta] = [state[0]!, state[1]!, state[2]!];
    const [sx, sy] = this.toScreen(px, py);
    const r = Math.max(this.world.vehicleRadius * this.scale, 4);
    this.scene.circle(sx, sy, r, COLORS.vehicle);
    // attitude tick: rotor axis tilts with theta
    const tipX = sx + 1.6 * r * Math.sin(theta);
    const tipY = sy - 1.6 * r * Math.cos(theta);
    this.scene.line(sx, sy, tipX, tipY, COLORS.heading, 2);
  }
}
