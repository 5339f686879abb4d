/** Dashboard view model. Every number here is copied verbatim from the
 * service's summary payload — the UI never computes metrics locally. */

import type { ConfigSummary, RegressionFit, SummaryPayload } from "./types.js";

export interface TableRow {
  label: string;
  nSessions: number;
  nTurns: number;
  sensibleness: number;
  specificity: number;
  ssa: number;
  perplexity: number | null;
}

export interface ScatterPoint {
  x: number;
  y: number;
  label: string;
}

export interface LineSegment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  rSquared: number;
}

export type DashboardModel =
  | { kind: "empty"; reason: string }
  | {
      kind: "data";
      rows: TableRow[];
      points: ScatterPoint[];
      line: LineSegment | null;
      regressionNote: string | null;
    };

export function configLabel(config: Record<string, unknown>): string {
  const parts = Object.entries(config)
    .filter(([key]) => key !== "perplexity")
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([key, value]) => `${key}=${String(value)}`);
  return parts.join(" ");
}

function toRow(c: ConfigSummary): TableRow {
  return {
    label: configLabel(c.config),
    nSessions: c.n_sessions,
    nTurns: c.n_turns,
    sensibleness: c.sensibleness,
    specificity: c.specificity,
    ssa: c.ssa,
    perplexity: c.perplexity,
  };
}

function isFit(r: SummaryPayload["regression"]): r is RegressionFit {
  return r != null && typeof (r as RegressionFit).slope === "number";
}

export function buildDashboard(summary: SummaryPayload): DashboardModel {
  if (summary.code === "not_enough_data" || summary.configs.length === 0) {
    return { kind: "empty", reason: summary.reason ?? "not enough data" };
  }
  const rows = summary.configs.map(toRow);
  const points: ScatterPoint[] = summary.configs
    .filter((c) => c.perplexity !== null)
    .map((c) => ({ x: c.perplexity as number, y: c.ssa, label: configLabel(c.config) }));

  let line: LineSegment | null = null;
  let note: string | null = null;
  const regression = summary.regression;
  if (isFit(regression) && points.length >= 2) {
    const xs = points.map((p) => p.x);
    const x1 = Math.min(...xs);
    const x2 = Math.max(...xs);
    line = {
      x1,
      y1: regression.slope * x1 + regression.intercept,
      x2,
      y2: regression.slope * x2 + regression.intercept,
      rSquared: regression.r_squared,
    };
  } else if (regression && !isFit(regression)) {
    note = regression.reason;
  }
  return { kind: "data", rows, points, line, regressionNote: note };
}
