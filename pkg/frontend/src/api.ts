/** Thin fetch client for the course-assistant service. */

import type { QueryRequest, QueryResponse, ServerConfig } from "./types";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number | null,
    public readonly stage: string | null = null,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(`network error: ${String(error)}`, null);
    }
    if (!response.ok) {
      let stage: string | null = null;
      let message = `${response.status} ${response.statusText}`;
      try {
        const body = await response.json();
        const detail = body?.detail;
        if (typeof detail === "string") message = detail;
        else if (detail?.message) {
          message = detail.message;
          stage = detail.stage ?? null;
        }
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(message, response.status, stage);
    }
    return (await response.json()) as T;
  }

  query(body: QueryRequest): Promise<QueryResponse> {
    return this.request<QueryResponse>("/api/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  config(): Promise<ServerConfig> {
    return this.request<ServerConfig>("/api/config");
  }

  health(): Promise<{ status: string; index_size: number; providers: Record<string, boolean> }> {
    return this.request("/api/health");
  }
}
