/** Pure HTML-string renderers.
 *
 * Everything here is a function from service data to markup — no DOM access,
 * no state — so the whole presentation layer is snapshot-testable without a
 * browser.  All dynamic text goes through escapeHtml. */

import type {
  DecisionRecordJson,
  FeedbackFormData,
  RecordPageJson,
  RecordView,
  TaxonomyNodeJson,
} from "./types.js";
import { formDataValid, toRecordView } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

const fmtProb = (p: number): string => p.toFixed(4);

const fmtContribution = (product: number): string =>
  `${product >= 0 ? "+" : "−"}${Math.abs(product).toFixed(4)}`;

function badgeHtml(view: RecordView): string {
  const cls = view.badge === "REJECTED" ? "rejected" : "accepted";
  return `<span class="badge ${cls}">${view.badge}</span>`;
}

// ------------------------------------------------------------------ queue

export function renderQueue(page: RecordPageJson): string {
  if (page.total === 0) {
    return `<div class="queue empty-state"><p>No decisions recorded yet.</p></div>`;
  }
  const rows = page.records.map(renderQueueRow).join("\n");
  const pageCount = Math.max(1, Math.ceil(page.total / page.page_size));
  return [
    `<div class="queue">`,
    `<table class="queue-table">`,
    `<thead><tr><th>record</th><th>decision</th><th>probability</th><th>when</th><th>flags</th></tr></thead>`,
    `<tbody>`,
    rows,
    `</tbody>`,
    `</table>`,
    `<nav class="pager">page ${page.page} of ${pageCount} (${page.total} records)</nav>`,
    `</div>`,
  ].join("\n");
}

function renderQueueRow(record: DecisionRecordJson): string {
  const view = toRecordView(record);
  return (
    `<tr class="queue-row" data-record-id="${escapeHtml(record.record_id)}">` +
    `<td><a href="#${escapeHtml(record.record_id)}">${escapeHtml(record.record_id)}</a></td>` +
    `<td>${badgeHtml(view)}</td>` +
    `<td>${fmtProb(record.probability)}</td>` +
    `<td>${escapeHtml(record.created_at)}</td>` +
    `<td>${view.flagCount}</td>` +
    `</tr>`
  );
}

// ------------------------------------------------------------ explanation

export function renderExplanation(view: RecordView): string {
  const report = view.raw.report;
  if (report === null) {
    return `<div class="explanation none"><p>No explanation — this action was accepted.</p></div>`;
  }
  const parts: string[] = [`<div class="explanation">`];
  if (view.degenerate) {
    parts.push(
      `<p class="degenerate-notice">The relevance grouping is degenerate for this record: ` +
        `the contributions could not be split into a clearly dominant group.</p>`,
    );
  }
  parts.push(`<h3>Why this was flagged</h3>`);
  parts.push(`<ul class="starred">`);
  for (const s of view.starred) {
    parts.push(
      `<li class="starred-feature" data-feature="${escapeHtml(s.feature)}">` +
        `<strong>${escapeHtml(s.feature)}</strong> ` +
        `<span class="contribution">${fmtContribution(s.product)}</span> — ` +
        `${escapeHtml(s.description)}</li>`,
    );
  }
  parts.push(`</ul>`);

  const productOf = new Map(report.contributions.map((c) => [c.feature, c.product]));
  if (report.other_positive.length > 0) {
    parts.push(`<h4>Also contributing</h4>`);
    parts.push(`<ul class="other-positive">`);
    for (const feature of report.other_positive) {
      parts.push(
        `<li data-feature="${escapeHtml(feature)}">${escapeHtml(feature)} ` +
          `<span class="contribution">${fmtContribution(productOf.get(feature) ?? 0)}</span></li>`,
      );
    }
    parts.push(`</ul>`);
  }

  const mitigating = report.contributions.filter((c) => c.product < 0);
  if (mitigating.length > 0) {
    parts.push(`<h4>Speaking against the violation</h4>`);
    parts.push(`<ul class="mitigating">`);
    for (const c of mitigating) {
      parts.push(
        `<li data-feature="${escapeHtml(c.feature)}">${escapeHtml(c.feature)} ` +
          `<span class="contribution">${fmtContribution(c.product)}</span></li>`,
      );
    }
    parts.push(`</ul>`);
  }

  parts.push(`<h4>Where the violation concentrates</h4>`);
  parts.push(`<ul class="taxonomy">`);
  parts.push(renderTaxonomyTree(report.taxonomy_fragment.root));
  parts.push(`</ul>`);
  parts.push(`</div>`);
  return parts.join("\n");
}

export function renderTaxonomyTree(node: TaxonomyNodeJson): string {
  const isLeaf = node.feature !== undefined;
  const label = isLeaf
    ? `<span class="tax-name">${escapeHtml(node.name)}</span> ` +
      `<code class="tax-feature">[${escapeHtml(node.feature ?? "")}]</code>: ` +
      `<span class="tax-desc">${escapeHtml(node.description)}</span>`
    : `<span class="tax-name">${escapeHtml(node.name)}</span>`;
  if (isLeaf || !node.children || node.children.length === 0) {
    return `<li class="tax-leaf">${label}</li>`;
  }
  const children = node.children.map(renderTaxonomyTree).join("\n");
  return `<li class="tax-group">${label}\n<ul class="taxonomy">\n${children}\n</ul>\n</li>`;
}

// ---------------------------------------------------------- record detail

export function renderRecordDetail(view: RecordView, form: FeedbackFormData): string {
  const raw = view.raw;
  const context =
    raw.action.raw_context === null
      ? ""
      : `<blockquote class="raw-context">${escapeHtml(raw.action.raw_context)}</blockquote>`;
  return [
    `<article class="record" data-record-id="${escapeHtml(raw.record_id)}">`,
    `<header>`,
    `<h2>${escapeHtml(raw.record_id)} ${badgeHtml(view)}</h2>`,
    `<p class="meta">action ${escapeHtml(raw.action.action_id)} by ${escapeHtml(raw.action.actor_id)}` +
      ` · probability ${fmtProb(raw.probability)} (threshold ${fmtProb(raw.threshold)})` +
      ` · model ${escapeHtml(raw.model_version)} · ${escapeHtml(raw.created_at)}</p>`,
    `</header>`,
    context,
    renderExplanation(view),
    renderFlagList(view),
    renderFeedbackForm(raw.record_id, form),
    `</article>`,
  ].join("\n");
}

export function renderFlagList(view: RecordView): string {
  if (view.flagCount === 0) {
    return `<div class="flags none"><p>No reviewer flags yet.</p></div>`;
  }
  const items = view.raw.feedback
    .map((f) => {
      const comment = f.comment === null ? "" : ` — ${escapeHtml(f.comment)}`;
      return (
        `<li class="flag"><strong>${escapeHtml(f.member_id)}</strong> ` +
        `<span class="verdict">${escapeHtml(f.verdict)}</span>${comment} ` +
        `<time>${escapeHtml(f.at)}</time></li>`
      );
    })
    .join("\n");
  return `<div class="flags"><h4>Reviewer flags (${view.flagCount})</h4>\n<ul>\n${items}\n</ul>\n</div>`;
}

// ---------------------------------------------------------- feedback form

export function renderFeedbackForm(
  recordId: string,
  form: FeedbackFormData,
  inlineError?: string,
): string {
  const check = (v: string): string => (form.verdict === v ? " checked" : "");
  const disabled = formDataValid(form) ? "" : " disabled";
  const error =
    inlineError === undefined
      ? ""
      : `<p class="form-error" role="alert">${escapeHtml(inlineError)}</p>\n`;
  return [
    `<form class="feedback" data-record-id="${escapeHtml(recordId)}">`,
    error +
      `<label>reviewer id <input name="member_id" value="${escapeHtml(form.memberId)}" required></label>`,
    `<fieldset class="verdict">`,
    `<label><input type="radio" name="verdict" value="flag_as_violation"${check("flag_as_violation")}> violation</label>`,
    `<label><input type="radio" name="verdict" value="flag_as_non_violation"${check("flag_as_non_violation")}> not a violation</label>`,
    `</fieldset>`,
    `<label>comment <textarea name="comment">${escapeHtml(form.comment)}</textarea></label>`,
    `<button type="submit"${disabled}>submit feedback</button>`,
    `</form>`,
  ].join("\n");
}

// ------------------------------------------------------------- banners

export function renderErrorBanner(message: string, retryLabel = "retry"): string {
  return (
    `<div class="banner error" role="alert">${escapeHtml(message)} ` +
    `<button class="retry">${escapeHtml(retryLabel)}</button></div>`
  );
}

export function renderQueuedBanner(pendingCount: number): string {
  const plural = pendingCount === 1 ? "flag" : "flags";
  return (
    `<div class="banner queued" role="status">Service unreachable — ` +
    `${pendingCount} ${plural} queued for retry; nothing has been lost.</div>`
  );
}
