/** Client-side mirror of the session protocol, used only to gate
 * controls; the server independently enforces every rule. */

import type { SessionPayload } from "./types.js";

export const MIN_TURNS = 14;
export const MAX_TURNS = 28;

export interface ToggleState {
  sensible: boolean;
  specific: boolean;
  /** True when the specific toggle is greyed out (turn marked not sensible). */
  specificDisabled: boolean;
}

export function initialToggleState(): ToggleState {
  return { sensible: true, specific: false, specificDisabled: false };
}

/** Marking a turn not-sensible forces specific to no and disables it. */
export function applySensibleToggle(state: ToggleState, sensible: boolean): ToggleState {
  if (!sensible) {
    return { sensible: false, specific: false, specificDisabled: true };
  }
  return { ...state, sensible: true, specificDisabled: false };
}

/** Ignored while the toggle is disabled; the label cannot diverge. */
export function applySpecificToggle(state: ToggleState, specific: boolean): ToggleState {
  if (state.specificDisabled) {
    return state;
  }
  return { ...state, specific };
}

export interface SessionView {
  sessionId: string;
  status: "active" | "complete";
  turns: SessionPayload["turns"];
  turnsToMinimum: number;
  turnsToMaximum: number;
  unlabeledBotTurns: number[];
  /** User may type a message (active, below the turn cap). */
  chatEnabled: boolean;
  /** Server would accept finish from this rater right now. */
  finishEnabled: boolean;
  /** Reason shown when the finish control is disabled. */
  finishTooltip: string | null;
}

export function deriveSessionView(session: SessionPayload, rater: string): SessionView {
  const n = session.turns.length;
  const unlabeled: number[] = [];
  session.turns.forEach((turn, idx) => {
    if (turn.speaker === "bot" && !(session.labels[String(idx)]?.[rater])) {
      unlabeled.push(idx);
    }
  });

  let tooltip: string | null = null;
  if (session.status !== "active") {
    tooltip = "session already complete";
  } else if (n < MIN_TURNS) {
    tooltip = `minimum ${MIN_TURNS} turns`;
  } else if (unlabeled.length > 0) {
    tooltip = "label every bot turn first";
  }

  return {
    sessionId: session.session_id,
    status: session.status,
    turns: session.turns,
    turnsToMinimum: Math.max(0, MIN_TURNS - n),
    turnsToMaximum: Math.max(0, MAX_TURNS - n),
    unlabeledBotTurns: unlabeled,
    chatEnabled: session.status === "active" && n < MAX_TURNS,
    finishEnabled: tooltip === null,
    finishTooltip: tooltip,
  };
}
