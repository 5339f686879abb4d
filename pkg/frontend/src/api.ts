/** Thin typed client for the evaluation service. All state mutations go
 * through here; the UI never computes or persists anything locally. */

import type {
  CreateSessionResponse,
  ErrorPayload,
  SessionPayload,
  SummaryPayload,
  TurnResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly payload: ErrorPayload,
  ) {
    super(`${payload.code}: ${payload.detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, body as ErrorPayload);
    }
    return body as T;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  createSession(config: Record<string, unknown>): Promise<CreateSessionResponse> {
    return this.post("/sessions", config);
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request(`/sessions/${sessionId}`);
  }

  sendTurn(sessionId: string, text: string): Promise<TurnResponse> {
    return this.post(`/sessions/${sessionId}/turns`, { text });
  }

  sendLabel(
    sessionId: string,
    turnIndex: number,
    worker: string,
    sensible: boolean,
    specific: boolean,
  ): Promise<{ ok: boolean }> {
    return this.post(`/sessions/${sessionId}/labels`, {
      turn_index: turnIndex,
      worker,
      sensible,
      specific,
    });
  }

  finish(sessionId: string): Promise<{ session_id: string; status: string }> {
    return this.post(`/sessions/${sessionId}/finish`);
  }

  listModels(): Promise<{ models: string[] }> {
    return this.request("/models");
  }

  summary(): Promise<SummaryPayload> {
    return this.request("/summary?regression=true");
  }
}
