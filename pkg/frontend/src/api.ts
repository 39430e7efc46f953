/**
 * Typed client for the review service.
 *
 * Every request goes through one funnel that checks the path against the
 * documented endpoint list, so the client cannot grow undocumented calls;
 * the contract tests assert the same list against a mock server. The
 * client never computes or rewrites scores or tags — it only transports.
 */

import type { QueuePage, ResultDetail, Stats, Tag, VerdictDraft } from "./types.js";

export const DOCUMENTED_ENDPOINTS = [
  "GET /health",
  "GET /stats",
  "GET /queue",
  "GET /result/{query_id}",
  "POST /verdict",
] as const;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  /** Endpoint templates used so far; inspected by the contract tests. */
  readonly calls: string[] = [];

  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private record(template: string): void {
    const known: readonly string[] = DOCUMENTED_ENDPOINTS;
    if (!known.includes(template)) {
      throw new Error(`undocumented endpoint: ${template}`);
    }
    this.calls.push(template);
  }

  private async request<T>(template: string, path: string, init?: RequestInit): Promise<T> {
    this.record(template);
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : "network failure");
    }
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch {
        /* non-JSON error body: surface it verbatim */
      }
      throw new ApiError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET /health", "/health");
  }

  stats(): Promise<Stats> {
    return this.request("GET /stats", "/stats");
  }

  queue(statuses: Tag[], limit: number, offset = 0): Promise<QueuePage> {
    const params = new URLSearchParams({
      status: statuses.join(","),
      limit: String(limit),
      offset: String(offset),
    });
    return this.request("GET /queue", `/queue?${params.toString()}`);
  }

  result(queryId: string): Promise<ResultDetail> {
    return this.request(
      "GET /result/{query_id}",
      `/result/${encodeURIComponent(queryId)}`,
    );
  }

  submitVerdict(draft: VerdictDraft): Promise<ResultDetail> {
    return this.request("POST /verdict", "/verdict", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    });
  }
}
