// Session orchestration: one live session, server-authoritative frames in,
// sequenced inputs out, banners for lifecycle events, trial download at the
// end. The transport is injected so tests can script the server side.

import { InputSequencer, keysToInput, PilotInput } from "./input.js";
import { parseFrame, type Frame } from "./protocol.js";
import type { Renderer } from "./renderer.js";

export interface Transport {
  send(text: string): void;
  close(): void;
}

export type ConsolePhase = "connecting" | "flying" | "ended" | "aborted";

export class PilotConsole {
  readonly sequencer = new InputSequencer();
  private transport: Transport | null = null;
  private readonly renderer: Renderer;
  lastFrame: Frame | null = null;
  framesRendered = 0;
  phase: ConsolePhase = "connecting";
  banner: string | null = null;
  /** Exactly the overlay risk value of the latest frame that carried one. */
  riskReadout: number | null = null;
  private readonly pressed = new Set<string>();

  constructor(renderer: Renderer) {
    this.renderer = renderer;
  }

  attach(transport: Transport): void {
    this.transport = transport;
    this.phase = "flying";
    this.renderer.render(null, null);
  }

  /** Handle one websocket text message; renders exactly one frame. */
  onMessage(text: string): void {
    const frame = parseFrame(text);
    this.lastFrame = frame;
    if (frame.overlay) {
      this.riskReadout = frame.overlay.risk;
    }
    if (frame.terminal) {
      this.phase = "ended";
      this.banner = frame.events.includes("landed")
        ? "LANDED"
        : frame.events.includes("collided")
          ? "COLLIDED"
          : "TRIAL OVER";
    }
    this.renderer.render(frame, this.banner);
    this.framesRendered += 1;
    if (this.phase === "flying") {
      this.sendCurrentInput();
    }
  }

  onDisconnect(): void {
    if (this.phase === "flying") {
      this.phase = "aborted";
      this.banner = "DISCONNECTED (trial aborted locally)";
      this.renderer.render(this.lastFrame, this.banner);
      this.framesRendered += 1;
    }
  }

  keyDown(key: string): void {
    if (!this.pressed.has(key)) {
      this.pressed.add(key);
      this.sendCurrentInput();
    }
  }

  keyUp(key: string): void {
    if (this.pressed.delete(key)) {
      this.sendCurrentInput();
    }
  }

  currentInput(): PilotInput {
    return keysToInput(this.pressed);
  }

  private sendCurrentInput(): void {
    if (!this.transport || this.phase !== "flying") {
      return;
    }
    this.transport.send(JSON.stringify(this.sequencer.next(this.currentInput())));
  }

  end(): void {
    if (this.phase === "flying") {
      this.phase = "ended";
      this.banner = "TRIAL OVER";
    }
    this.transport?.close();
  }
}
