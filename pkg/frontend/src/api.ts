import type {
  AttentionRequest,
  AttentionResponse,
  ErrorPayload,
  MetaResponse,
  RecommendRequest,
  RecommendResponse,
} from "./types.js";

/** A non-2xx answer from the inference service, with its machine-readable
 * error code and the request fields it blames. */
export class ApiRequestError extends Error {
  readonly status: number;
  readonly code: string;
  readonly fields: string[];

  constructor(status: number, code: string, message: string, fields: string[]) {
    super(message);
    this.status = status;
    this.code = code;
    this.fields = fields;
  }
}

async function throwApiError(res: Response): Promise<never> {
  let code = "unknown";
  let message = `request failed with status ${res.status}`;
  let fields: string[] = [];
  try {
    const body = (await res.json()) as ErrorPayload;
    code = body.error.code;
    message = body.error.message;
    fields = body.error.fields ?? [];
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiRequestError(res.status, code, message, fields);
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  async getMeta(): Promise<MetaResponse> {
    const res = await fetch(`${this.baseUrl}/meta`);
    if (!res.ok) return throwApiError(res);
    return (await res.json()) as MetaResponse;
  }

  async recommend(
    body: RecommendRequest,
    signal?: AbortSignal,
  ): Promise<RecommendResponse> {
    const res = await fetch(`${this.baseUrl}/recommend`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) return throwApiError(res);
    return (await res.json()) as RecommendResponse;
  }

  async attention(
    body: AttentionRequest,
    signal?: AbortSignal,
  ): Promise<AttentionResponse> {
    const res = await fetch(`${this.baseUrl}/attention`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) return throwApiError(res);
    return (await res.json()) as AttentionResponse;
  }
}

/** Serializes a stream of requests down to the newest one: starting a run
 * aborts the previous in-flight run, and a stale run's result is dropped. */
export class LatestWins {
  private controller: AbortController | null = null;

  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    try {
      const result = await task(controller.signal);
      return this.controller === controller ? result : null;
    } catch (err) {
      if (controller.signal.aborted) return null;
      throw err;
    }
  }
}
