/** Browser bootstrap: wires the typed client, the session view, and the
 * renderers to the DOM. State is refreshed from the server after every
 * mutation so the client can never diverge. */

import { ApiError, ServiceClient } from "./api.js";
import { buildDashboard } from "./dashboard.js";
import { renderControls, renderDashboard, renderTranscript } from "./render.js";
import {
  applySensibleToggle,
  applySpecificToggle,
  deriveSessionView,
  initialToggleState,
  type ToggleState,
} from "./session.js";

const RATER = "browser";

interface AppState {
  sessionId: string | null;
  toggles: Map<number, ToggleState>;
}

export function startApp(root: HTMLElement, client: ServiceClient): void {
  const state: AppState = { sessionId: null, toggles: new Map() };
  const banner = document.createElement("div");
  banner.className = "banner";
  const chat = document.createElement("div");
  const dash = document.createElement("div");
  root.append(banner, chat, dash);

  async function guard<T>(op: () => Promise<T>): Promise<T | null> {
    try {
      const result = await op();
      banner.textContent = "";
      return result;
    } catch (err) {
      banner.textContent =
        err instanceof ApiError ? `rejected: ${err.message}` : "network failure — retry";
      return null;
    }
  }

  async function refresh(): Promise<void> {
    if (state.sessionId) {
      const session = await guard(() => client.getSession(state.sessionId!));
      if (session) {
        const view = deriveSessionView(session, RATER);
        chat.innerHTML = renderTranscript(view, state.toggles) + renderControls(view);
        wireControls(view.finishEnabled);
      }
    }
    const summary = await guard(() => client.summary());
    if (summary) {
      dash.innerHTML = renderDashboard(buildDashboard(summary));
    }
  }

  async function submitLabel(turnIndex: number): Promise<void> {
    const t = state.toggles.get(turnIndex) ?? initialToggleState();
    if (!state.sessionId) return;
    await guard(() =>
      client.sendLabel(state.sessionId!, turnIndex, RATER, t.sensible, t.specific),
    );
    await refresh();
  }

  function wireControls(finishEnabled: boolean): void {
    chat.querySelectorAll<HTMLInputElement>("input.sensible").forEach((el) => {
      el.addEventListener("change", () => {
        const idx = Number(el.dataset.turn);
        const prev = state.toggles.get(idx) ?? initialToggleState();
        state.toggles.set(idx, applySensibleToggle(prev, el.checked));
        void submitLabel(idx);
      });
    });
    chat.querySelectorAll<HTMLInputElement>("input.specific").forEach((el) => {
      el.addEventListener("change", () => {
        const idx = Number(el.dataset.turn);
        const prev = state.toggles.get(idx) ?? initialToggleState();
        state.toggles.set(idx, applySpecificToggle(prev, el.checked));
        void submitLabel(idx);
      });
    });
    const input = chat.querySelector<HTMLInputElement>("#user-input");
    chat.querySelector("#send")?.addEventListener("click", async () => {
      if (!state.sessionId || !input || !input.value) return;
      await guard(() => client.sendTurn(state.sessionId!, input.value));
      input.value = "";
      await refresh();
    });
    chat.querySelector("#finish")?.addEventListener("click", async () => {
      if (!state.sessionId || !finishEnabled) return;
      await guard(() => client.finish(state.sessionId!));
      await refresh();
    });
  }

  void (async () => {
    const created = await guard(() => client.createSession({ model: "generic" }));
    if (created) {
      state.sessionId = created.session_id;
    }
    await refresh();
  })();
}

declare global {
  interface Window {
    PARLEY_BASE_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(
    document.getElementById("app") as HTMLElement,
    new ServiceClient(window.PARLEY_BASE_URL ?? "http://127.0.0.1:8000"),
  );
}
