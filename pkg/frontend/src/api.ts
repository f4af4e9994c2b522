/**
 * Session API client.
 *
 * Every method maps to one service endpoint and either returns the parsed
 * JSON payload or throws an ApiError carrying the service's {code, message}.
 * The fetch implementation is injectable so contract tests can run against
 * a mocked server.
 */

import type {
  CreateSessionRequest,
  CreateSessionResponse,
  ErrorBody,
  LabelResponse,
  QueryResponse,
  StateResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let body: ErrorBody = { code: "unknown", message: resp.statusText };
    try {
      body = (await resp.json()) as ErrorBody;
    } catch {
      /* non-JSON error body: keep the fallback */
    }
    throw new ApiError(resp.status, body.code ?? "unknown", body.message ?? "");
  }
  return (await resp.json()) as T;
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async createSession(req: CreateSessionRequest): Promise<CreateSessionResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    return unwrap<CreateSessionResponse>(resp);
  }

  async getState(sessionId: string): Promise<StateResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}`);
    return unwrap<StateResponse>(resp);
  }

  async nextQuery(sessionId: string): Promise<QueryResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/query`, {
      method: "POST",
    });
    return unwrap<QueryResponse>(resp);
  }

  async submitLabel(sessionId: string, index: number, label: number): Promise<LabelResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ index, label }),
    });
    return unwrap<LabelResponse>(resp);
  }

  async exportCsv(sessionId: string): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/export`);
    if (!resp.ok) {
      let body: ErrorBody = { code: "unknown", message: resp.statusText };
      try {
        body = (await resp.json()) as ErrorBody;
      } catch {
        /* keep fallback */
      }
      throw new ApiError(resp.status, body.code ?? "unknown", body.message ?? "");
    }
    return resp.text();
  }
}
