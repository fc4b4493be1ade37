/** Browser bootstrap: wires the API client, the retry queue, and the pure
 * renderers into a single-page review screen.
 *
 * All state lives in one object; every change re-renders the affected
 * region from service data.  The base URL is the app's only configuration,
 * read from <meta name="fnvd-base-url">. */

import { ApiClient, ApiError, NetworkError, type QueueFilter } from "./api.js";
import { FeedbackRetryQueue, type PendingStore } from "./retry.js";
import type { DecisionRecordJson, FeedbackFormData, Verdict } from "./types.js";
import { toRecordView } from "./types.js";
import {
  renderErrorBanner,
  renderQueue,
  renderQueuedBanner,
  renderRecordDetail,
} from "./views.js";

interface AppState {
  filter: QueueFilter;
  selected: DecisionRecordJson | null;
  form: FeedbackFormData;
  formError: string | undefined;
}

const EMPTY_FORM: FeedbackFormData = { memberId: "", verdict: null, comment: "" };

function localStorageStore(key: string): PendingStore {
  return {
    load: () => {
      const text = window.localStorage.getItem(key);
      return text === null ? [] : JSON.parse(text);
    },
    save: (items) => window.localStorage.setItem(key, JSON.stringify(items)),
  };
}

export function startApp(root: HTMLElement): void {
  const baseUrl =
    document.querySelector<HTMLMetaElement>('meta[name="fnvd-base-url"]')?.content ?? "";
  const client = new ApiClient(baseUrl);
  const retryQueue = new FeedbackRetryQueue(client, localStorageStore("fnvd-pending-feedback"));

  const state: AppState = {
    filter: { page: 1, pageSize: 20 },
    selected: null,
    form: { ...EMPTY_FORM },
    formError: undefined,
  };

  root.innerHTML = [
    `<div id="banner"></div>`,
    `<section id="queue-pane"></section>`,
    `<section id="detail-pane"></section>`,
  ].join("\n");
  const bannerEl = root.querySelector<HTMLElement>("#banner")!;
  const queueEl = root.querySelector<HTMLElement>("#queue-pane")!;
  const detailEl = root.querySelector<HTMLElement>("#detail-pane")!;

  const renderBanner = (): void => {
    const pending = retryQueue.pending();
    bannerEl.innerHTML = pending > 0 ? renderQueuedBanner(pending) : "";
  };

  const renderDetail = (): void => {
    detailEl.innerHTML =
      state.selected === null
        ? ""
        : renderRecordDetail(toRecordView(state.selected), state.form);
    if (state.formError !== undefined) {
      const form = detailEl.querySelector("form.feedback");
      form?.insertAdjacentHTML("afterbegin", renderErrorBanner(state.formError, "dismiss"));
    }
  };

  const loadQueue = async (): Promise<void> => {
    try {
      queueEl.innerHTML = renderQueue(await client.fetchQueue(state.filter));
    } catch (err) {
      const message =
        err instanceof NetworkError
          ? "Cannot reach the moderation service."
          : err instanceof ApiError
            ? err.message
            : String(err);
      queueEl.innerHTML = renderErrorBanner(message);
    }
  };

  const openRecord = async (recordId: string): Promise<void> => {
    try {
      state.selected = await client.fetchRecord(recordId);
      state.form = { ...EMPTY_FORM };
      state.formError = undefined;
    } catch (err) {
      state.selected = null;
      state.formError = undefined;
      detailEl.innerHTML = renderErrorBanner(
        err instanceof Error ? err.message : String(err),
      );
      return;
    }
    renderDetail();
  };

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const row = target.closest<HTMLElement>("tr.queue-row");
    if (row?.dataset.recordId) {
      event.preventDefault();
      void openRecord(row.dataset.recordId);
    }
    if (target.matches(".banner.error button.retry")) {
      void loadQueue();
    }
  });

  root.addEventListener("input", (event) => {
    const input = event.target as HTMLInputElement | HTMLTextAreaElement;
    const form = input.closest("form.feedback");
    if (!form) return;
    if (input.name === "member_id") state.form.memberId = input.value;
    if (input.name === "verdict") state.form.verdict = input.value as Verdict;
    if (input.name === "comment") state.form.comment = input.value;
    state.formError = undefined;
    renderDetail();
  });

  root.addEventListener("submit", (event) => {
    const form = event.target as HTMLElement;
    if (!form.matches("form.feedback")) return;
    event.preventDefault();
    const recordId = form.dataset.recordId;
    if (recordId === undefined || state.selected === null) return;
    void (async () => {
      try {
        const outcome = await retryQueue.submit(recordId, state.form);
        if (outcome.status === "delivered") {
          state.selected = await client.fetchRecord(recordId); // round-trip: show the flag
          state.form = { ...EMPTY_FORM };
          state.formError = undefined;
        }
      } catch (err) {
        state.formError = err instanceof ApiError ? err.message : String(err);
      }
      renderBanner();
      renderDetail();
      await loadQueue();
    })();
  });

  window.addEventListener("online", () => {
    void retryQueue.flush().then((result) => {
      renderBanner();
      if (result.rejected.length > 0 && state.formError === undefined) {
        state.formError = result.rejected.map(({ error }) => error.message).join("; ");
        renderDetail();
      }
      return loadQueue();
    });
  });

  renderBanner();
  void loadQueue();
}
