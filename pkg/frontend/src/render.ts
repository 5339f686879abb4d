/** Pure HTML-string renderers (no DOM dependency, unit-testable). */

import type { DashboardModel } from "./dashboard.js";
import type { SessionView, ToggleState } from "./session.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderToggles(turnIndex: number, state: ToggleState): string {
  const specificAttrs = state.specificDisabled ? " disabled" : "";
  return (
    `<span class="toggles" data-turn="${turnIndex}">` +
    `<label><input type="checkbox" class="sensible" data-turn="${turnIndex}"` +
    `${state.sensible ? " checked" : ""}> Sensible</label>` +
    `<label><input type="checkbox" class="specific" data-turn="${turnIndex}"` +
    `${state.specific ? " checked" : ""}${specificAttrs}> Specific</label>` +
    `</span>`
  );
}

export function renderTranscript(
  view: SessionView,
  toggles: Map<number, ToggleState>,
): string {
  const rows = view.turns.map((turn, idx) => {
    const label =
      turn.speaker === "bot"
        ? renderToggles(idx, toggles.get(idx) ?? { sensible: true, specific: false, specificDisabled: false })
        : "";
    return (
      `<li class="turn ${turn.speaker}">` +
      `<span class="speaker">${turn.speaker}</span>` +
      `<span class="text">${escapeHtml(turn.text)}</span>${label}</li>`
    );
  });
  return `<ol class="transcript">${rows.join("")}</ol>`;
}

export function renderControls(view: SessionView): string {
  const finishAttrs = view.finishEnabled
    ? ""
    : ` disabled title="${escapeHtml(view.finishTooltip ?? "")}"`;
  const inputAttrs = view.chatEnabled ? "" : " disabled";
  return (
    `<div class="controls">` +
    `<input id="user-input" type="text"${inputAttrs} placeholder="say something">` +
    `<button id="send"${inputAttrs}>Send</button>` +
    `<button id="finish"${finishAttrs}>Finish</button>` +
    `<span class="progress">${view.turns.length} turns` +
    ` (min ${view.turnsToMinimum} more, max ${view.turnsToMaximum} more)</span>` +
    `</div>`
  );
}

function pct(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export function renderDashboard(model: DashboardModel): string {
  if (model.kind === "empty") {
    return `<div class="empty-state">No data yet: ${escapeHtml(model.reason)}</div>`;
  }
  const rows = model.rows
    .map(
      (r) =>
        `<tr><td>${escapeHtml(r.label)}</td><td>${r.nSessions}</td>` +
        `<td>${r.nTurns}</td><td>${pct(r.sensibleness)}</td>` +
        `<td>${pct(r.specificity)}</td><td>${pct(r.ssa)}</td>` +
        `<td>${r.perplexity === null ? "—" : r.perplexity}</td></tr>`,
    )
    .join("");
  const table =
    `<table class="summary"><thead><tr><th>config</th><th>sessions</th>` +
    `<th>turns</th><th>sensibleness</th><th>specificity</th><th>SSA</th>` +
    `<th>perplexity</th></tr></thead><tbody>${rows}</tbody></table>`;

  let chart = "";
  if (model.points.length > 0) {
    const circles = model.points
      .map((p) => `<circle cx="${p.x}" cy="${p.y}" r="0.1"><title>${escapeHtml(p.label)}</title></circle>`)
      .join("");
    const line = model.line
      ? `<line x1="${model.line.x1}" y1="${model.line.y1}"` +
        ` x2="${model.line.x2}" y2="${model.line.y2}"></line>` +
        `<text class="r2">R² = ${model.line.rSquared}</text>`
      : "";
    chart = `<svg class="scatter" viewBox="0 0 10 1">${circles}${line}</svg>`;
  }
  const note = model.regressionNote
    ? `<div class="regression-note">${escapeHtml(model.regressionNote)}</div>`
    : "";
  return table + chart + note;
}
