// Keyboard mapping: arrow keys command the bound extremes, no key means zero.
// Left/Right set angular acceleration -0.5 / +0.5, Down/Up set thrust
// -1.7 / +1.7; opposing keys cancel.

import type { InputMessage } from "./protocol.js";

export const ALPHA_EXTREME = 0.5;
export const THRUST_EXTREME = 1.7;

export interface PilotInput {
  alpha: number;
  thrust: number;
}

export function keysToInput(pressed: ReadonlySet<string>): PilotInput {
  let alpha = 0;
  let thrust = 0;
  if (pressed.has("ArrowLeft")) alpha -= ALPHA_EXTREME;
  if (pressed.has("ArrowRight")) alpha += ALPHA_EXTREME;
  if (pressed.has("ArrowDown")) thrust -= THRUST_EXTREME;
  if (pressed.has("ArrowUp")) thrust += THRUST_EXTREME;
  return { alpha, thrust };
}

/** Stamps outgoing inputs with a strictly increasing sequence number, so
 *  out-of-order sends are impossible by construction. */
export class InputSequencer {
  private seq = 0;

  next(input: PilotInput): InputMessage {
    return { type: "input", alpha: input.alpha, thrust: input.thrust, seq: this.seq++ };
  }

  get count(): number {
    return this.seq;
  }
}
