/** Thin typed client for the moderation service HTTP API.
 *
 * The fetch implementation is injectable so tests (and non-browser hosts)
 * can supply their own; errors split into ApiError (the server answered
 * with an {error, detail} body) and NetworkError (no answer at all), because
 * the UI treats them differently: API errors render inline, network errors
 * feed the offline retry queue. */

import type {
  Decision,
  DecisionRecordJson,
  FeedbackFormData,
  MetricsJson,
  RecordPageJson,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    readonly detail: string,
  ) {
    super(`${kind}: ${detail}`);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.name = "NetworkError";
    this.cause = cause;
  }
}

export interface QueueFilter {
  decision?: Decision;
  flagged?: boolean;
  since?: string;
  page?: number;
  pageSize?: number;
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  fetchQueue(filter: QueueFilter = {}): Promise<RecordPageJson> {
    const params = new URLSearchParams();
    if (filter.decision !== undefined) params.set("decision", filter.decision);
    if (filter.flagged !== undefined) params.set("flagged", String(filter.flagged));
    if (filter.since !== undefined) params.set("since", filter.since);
    if (filter.page !== undefined) params.set("page", String(filter.page));
    if (filter.pageSize !== undefined) params.set("page_size", String(filter.pageSize));
    const query = params.size > 0 ? `?${params.toString()}` : "";
    return this.request<RecordPageJson>("GET", `/records${query}`);
  }

  fetchRecord(recordId: string): Promise<DecisionRecordJson> {
    return this.request<DecisionRecordJson>("GET", `/records/${encodeURIComponent(recordId)}`);
  }

  submitFeedback(recordId: string, form: FeedbackFormData): Promise<DecisionRecordJson> {
    if (form.verdict === null) {
      throw new Error("feedback form incomplete: verdict not chosen");
    }
    return this.request<DecisionRecordJson>(
      "POST",
      `/records/${encodeURIComponent(recordId)}/feedback`,
      {
        member_id: form.memberId,
        verdict: form.verdict,
        comment: form.comment.trim() === "" ? null : form.comment,
      },
    );
  }

  metrics(): Promise<MetricsJson> {
    return this.request<MetricsJson>("GET", "/metrics");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) {
      let kind = `HTTP ${response.status}`;
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { error?: string; detail?: string };
        if (typeof parsed.error === "string") kind = parsed.error;
        if (typeof parsed.detail === "string") detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status-line fallback
      }
      throw new ApiError(response.status, kind, detail);
    }
    return (await response.json()) as T;
  }
}
