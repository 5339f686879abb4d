/** Wire types mirroring the evaluation service's JSON payloads. */

export interface Turn {
  speaker: "bot" | "user";
  text: string;
}

export interface LabelValue {
  sensible: boolean;
  specific: boolean;
}

/** Labels keyed by turn index (as a string, per JSON), then worker id. */
export type LabelMap = Record<string, Record<string, LabelValue>>;

export interface SessionPayload {
  session_id: string;
  config: Record<string, unknown>;
  status: "active" | "complete";
  turns: Turn[];
  labels: LabelMap;
}

export interface CreateSessionResponse {
  session_id: string;
  opener: Turn;
}

export interface BotTurn {
  speaker: "bot";
  text: string;
  turn_index: number;
}

export interface TurnResponse {
  bot_turn: BotTurn | null;
  detail?: string;
}

export interface ConfigSummary {
  config: Record<string, unknown>;
  n_sessions: number;
  n_turns: number;
  sensibleness: number;
  specificity: number;
  ssa: number;
  perplexity: number | null;
}

export interface RegressionFit {
  slope: number;
  intercept: number;
  r_squared: number;
}

export interface NotEnoughData {
  code: "not_enough_data";
  reason: string;
}

export interface SummaryPayload {
  code?: "not_enough_data";
  reason?: string;
  configs: ConfigSummary[];
  regression?: RegressionFit | NotEnoughData | null;
}

export interface ErrorPayload {
  code: string;
  reason: string;
  detail: string;
}
