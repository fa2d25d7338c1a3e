// Density grid -> RGBA pixels with a perceptually uniform ramp
// (viridis-style stops); brighter means higher probability.

import type { OverlayGrid } from "./protocol.js";

const STOPS: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function rampColor(v: number): [number, number, number] {
  const clamped = Math.min(Math.max(v, 0), 1);
  const scaled = clamped * (STOPS.length - 1);
  const lo = Math.min(Math.floor(scaled), STOPS.length - 2);
  const frac = scaled - lo;
  const a = STOPS[lo]!;
  const b = STOPS[lo + 1]!;
  return [
    Math.round(a[0] + frac * (b[0] - a[0])),
    Math.round(a[1] + frac * (b[1] - a[1])),
    Math.round(a[2] + frac * (b[2] - a[2])),
  ];
}

export interface HeatmapPixels {
  width: number;
  height: number;
  /** RGBA, row 0 at the grid's y0 edge (world order, not screen order). */
  data: Uint8ClampedArray;
}

export function gridToPixels(grid: OverlayGrid): HeatmapPixels {
  const { nx, ny, values } = grid;
  if (values.length !== nx * ny) {
    throw new Error(`grid values length ${values.length} != ${nx}*${ny}`);
  }
  let peak = 0;
  for (const v of values) peak = Math.max(peak, v);
  const scale = peak > 0 ? 1 / peak : 0;
  const data = new Uint8ClampedArray(nx * ny * 4);
  for (let i = 0; i < values.length; i++) {
    const norm = (values[i] ?? 0) * scale;
    const [r, g, b] = rampColor(norm);
    data[i * 4] = r;
    data[i * 4 + 1] = g;
    data[i * 4 + 2] = b;
    data[i * 4 + 3] = Math.round(40 + 180 * norm); // faint floor, opaque peak
  }
  return { width: nx, height: ny, data };
}
