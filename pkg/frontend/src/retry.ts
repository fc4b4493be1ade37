/** Offline handling for feedback submission.
 *
 * A flag the reviewer submitted must never be dropped silently: if the
 * service is unreachable (NetworkError), the submission is parked in a
 * store and retried on flush; if the service *answers* with an error
 * (DuplicateFlag, UnknownRecord, validation), that is a final verdict and is
 * surfaced to the caller instead of being retried. */

import { ApiClient, ApiError, NetworkError } from "./api.js";
import type { DecisionRecordJson, FeedbackFormData } from "./types.js";

export interface PendingFeedback {
  recordId: string;
  form: FeedbackFormData;
  queuedAt: string;
}

/** Minimal persistence surface; the browser app adapts localStorage to it,
 * tests use the in-memory default. */
export interface PendingStore {
  load(): PendingFeedback[];
  save(items: PendingFeedback[]): void;
}

export function inMemoryStore(): PendingStore {
  let items: PendingFeedback[] = [];
  return {
    load: () => items.map((it) => ({ ...it, form: { ...it.form } })),
    save: (next) => {
      items = next.map((it) => ({ ...it, form: { ...it.form } }));
    },
  };
}

export type SubmitOutcome =
  | { status: "delivered"; record: DecisionRecordJson }
  | { status: "queued"; pending: number };

export interface FlushResult {
  delivered: DecisionRecordJson[];
  /** Submissions the server rejected outright; removed from the queue. */
  rejected: { item: PendingFeedback; error: ApiError }[];
  /** Still offline: these remain queued. */
  remaining: number;
}

export class FeedbackRetryQueue {
  constructor(
    private readonly client: ApiClient,
    private readonly store: PendingStore = inMemoryStore(),
    private readonly now: () => string = () => new Date().toISOString(),
  ) {}

  pending(): number {
    return this.store.load().length;
  }

  /** Try to submit now; on network failure park the submission.  Server-side
   * rejections (ApiError) propagate to the caller for inline display. */
  async submit(recordId: string, form: FeedbackFormData): Promise<SubmitOutcome> {
    try {
      const record = await this.client.submitFeedback(recordId, form);
      return { status: "delivered", record };
    } catch (err) {
      if (err instanceof NetworkError) {
        const items = this.store.load();
        items.push({ recordId, form: { ...form }, queuedAt: this.now() });
        this.store.save(items);
        return { status: "queued", pending: items.length };
      }
      throw err;
    }
  }

  /** Retry everything queued, oldest first.  Stops at the first network
   * failure (still offline); server rejections are dropped from the queue
   * and reported, never silently discarded. */
  async flush(): Promise<FlushResult> {
    const result: FlushResult = { delivered: [], rejected: [], remaining: 0 };
    let items = this.store.load();
    while (items.length > 0) {
      const item = items[0]!;
      try {
        const record = await this.client.submitFeedback(item.recordId, item.form);
        result.delivered.push(record);
      } catch (err) {
        if (err instanceof NetworkError) {
          break; // still offline; keep this and everything behind it
        }
        if (err instanceof ApiError) {
          result.rejected.push({ item, error: err });
        } else {
          throw err;
        }
      }
      items = items.slice(1);
      this.store.save(items);
    }
    result.remaining = items.length;
    return result;
  }
}
