// Wire types for the pilot-service protocol. The server is authoritative:
// every rendered vehicle state originates from a Frame, never from local
// simulation.

export interface SessionInfo {
  id: string;
  channel: string;
  mode: "realtime" | "stepped";
  dt: number;
  world: WorldInfo;
}

export interface WorldInfo {
  laneBoundaries: number[];
  touchpad: [number, number, number, number];
  groundY: number;
  dangerZone: [number, number, number, number];
  startPosition: [number, number];
  bounds: [number, number, number, number];
  vehicleRadius: number;
}

export interface OverlayGrid {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
  nx: number;
  ny: number;
  values: number[];
}

export interface Overlay {
  horizon: number;
  computedAtTick: number;
  grid: OverlayGrid;
  risk: number;
}

export interface Frame {
  type: "frame";
  t: number;
  step: number;
  state: number[]; // [px, py, theta, vx, vy, w]
  events: string[];
  obstacle: [number, number, number, number] | null;
  overlay: Overlay | null;
  terminal: boolean;
}

export interface InputMessage {
  type: "input";
  alpha: number;
  thrust: number;
  seq: number;
}

export function parseFrame(text: string): Frame {
  const msg = JSON.parse(text);
  if (msg.type !== "frame") {
    throw new Error(`expected a frame message, got type=${msg.type}`);
  }
  if (!Array.isArray(msg.state) || msg.state.length !== 6) {
    throw new Error("frame state must be a 6-vector");
  }
  return msg as Frame;
}

export async function createSession(
  serverUrl: string,
  seed: number,
  fetchFn: typeof fetch = fetch,
): Promise<SessionInfo> {
  const resp = await fetchFn(`${serverUrl}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ seed, mode: "realtime" }),
  });
  if (!resp.ok) {
    throw new Error(`session creation failed: HTTP ${resp.status}`);
  }
  return (await resp.json()) as SessionInfo;
}

export interface TrialDownload {
  filename: string;
  csv: string;
  sidecar: Record<string, unknown>;
}

export async function fetchTrial(
  serverUrl: string,
  sessionId: string,
  fetchFn: typeof fetch = fetch,
): Promise<TrialDownload> {
  const resp = await fetchFn(`${serverUrl}/sessions/${sessionId}/trial`);
  if (!resp.ok) {
    throw new Error(`trial download failed: HTTP ${resp.status}`);
  }
  return (await resp.json()) as TrialDownload;
}
