// Thin REST client for the gateway. Base URL is configurable; all errors
// surface as the gateway's {stage, message, retriable} body.

import type { GatewayErrorBody, SceneSpec, TurnRecord } from "./types.js";

export class GatewayError extends Error {
  body: GatewayErrorBody;

  constructor(body: GatewayErrorBody) {
    super(body.message);
    this.body = body;
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private baseUrl: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? fetch.bind(globalThis);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      if (payload && typeof payload.stage === "string") {
        throw new GatewayError(payload as GatewayErrorBody);
      }
      throw new GatewayError({
        stage: "transport",
        message: `HTTP ${response.status}`,
        retriable: response.status >= 500,
      });
    }
    return payload as T;
  }

  createSession(sessionId?: string): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", sessionId ? { session_id: sessionId } : {});
  }

  submitTurn(sessionId: string, userText: string): Promise<TurnRecord> {
    return this.request("POST", `/sessions/${sessionId}/turns`, { user_text: userText });
  }

  getScene(sessionId: string, revision?: number): Promise<SceneSpec> {
    const query = revision === undefined ? "" : `?revision=${revision}`;
    return this.request("GET", `/sessions/${sessionId}/scene${query}`);
  }

  getMemory(sessionId: string): Promise<{ session_id: string; turns: TurnRecord[] }> {
    return this.request("GET", `/sessions/${sessionId}/memory`);
  }
}
