import { describe, expect, it } from "vitest";

import { buildDashboard, configLabel } from "../src/dashboard.js";
import { renderDashboard } from "../src/render.js";
import type { SummaryPayload } from "../src/types.js";

/** Shaped exactly like the service's /summary response for two model
 * configurations with perplexities attached. */
const TWO_CONFIG_FIXTURE: SummaryPayload = {
  configs: [
    {
      config: { model: "generic", perplexity: 2.5 },
      n_sessions: 2,
      n_turns: 14,
      sensibleness: 0.8571428571428571,
      specificity: 0.14285714285714285,
      ssa: 0.5,
      perplexity: 2.5,
    },
    {
      config: { model: "toy", seed: 7, perplexity: 6.0 },
      n_sessions: 1,
      n_turns: 7,
      sensibleness: 0.42857142857142855,
      specificity: 0.14285714285714285,
      ssa: 0.2857142857142857,
      perplexity: 6.0,
    },
  ],
  regression: {
    slope: -0.061224489795918366,
    intercept: 0.6530612244897959,
    r_squared: 1.0,
  },
};

describe("dashboard model", () => {
  it("copies every number verbatim from the two-config payload", () => {
    const model = buildDashboard(TWO_CONFIG_FIXTURE);
    expect(model.kind).toBe("data");
    if (model.kind !== "data") return;

    expect(model.rows).toHaveLength(2);
    model.rows.forEach((row, i) => {
      const cfg = TWO_CONFIG_FIXTURE.configs[i];
      expect(row.sensibleness).toBe(cfg.sensibleness);
      expect(row.specificity).toBe(cfg.specificity);
      expect(row.ssa).toBe(cfg.ssa);
      expect(row.perplexity).toBe(cfg.perplexity);
      expect(row.nSessions).toBe(cfg.n_sessions);
      expect(row.nTurns).toBe(cfg.n_turns);
    });

    expect(model.points).toEqual([
      { x: 2.5, y: 0.5, label: "model=generic" },
      { x: 6.0, y: 0.2857142857142857, label: "model=toy seed=7" },
    ]);

    const fit = TWO_CONFIG_FIXTURE.regression as {
      slope: number;
      intercept: number;
      r_squared: number;
    };
    expect(model.line).not.toBeNull();
    expect(model.line!.rSquared).toBe(fit.r_squared);
    expect(model.line!.y1).toBe(fit.slope * 2.5 + fit.intercept);
    expect(model.line!.y2).toBe(fit.slope * 6.0 + fit.intercept);
  });

  it("renders the exact R-squared from the payload", () => {
    const model = buildDashboard(TWO_CONFIG_FIXTURE);
    const html = renderDashboard(model);
    expect(html).toContain("R² = 1");
  });

  it("single config renders the table but no regression line", () => {
    const single: SummaryPayload = {
      configs: [TWO_CONFIG_FIXTURE.configs[0]],
      regression: {
        code: "not_enough_data",
        reason: "need >= 2 configs with distinct perplexities",
      },
    };
    const model = buildDashboard(single);
    expect(model.kind).toBe("data");
    if (model.kind !== "data") return;
    expect(model.rows).toHaveLength(1);
    expect(model.line).toBeNull();
    expect(model.regressionNote).toContain("distinct perplexities");
  });

  it("not-enough-data payload becomes the empty state", () => {
    const model = buildDashboard({
      code: "not_enough_data",
      reason: "no complete sessions",
      configs: [],
    });
    expect(model).toEqual({ kind: "empty", reason: "no complete sessions" });
    expect(renderDashboard(model)).toContain("No data yet");
  });

  it("config labels omit perplexity and sort keys", () => {
    expect(configLabel({ perplexity: 9, model: "toy", seed: 3 })).toBe("model=toy seed=3");
  });
});
