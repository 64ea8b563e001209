/** Pure HTML renderers. Each takes data and returns a markup string. */

import type { GenerateResponse, RetrievedDoc, Trace } from "./api.js";
import type { HistoryTurn } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function traceLine(trace: Trace): string {
  const drops = trace.drops.map((d) => d.toFixed(4)).join(", ");
  const halted = trace.halted_at === null ? "-" : String(trace.halted_at);
  return `reason=${escapeHtml(trace.reason)} halted_at=${halted} drops=[${drops}]`;
}

/** Ranked preview list, in response order, each doc expandable. */
export function renderPreviewList(docs: RetrievedDoc[], trace: Trace): string {
  if (docs.length === 0) {
    return (
      `<p class="empty-state">No documents meet the relevance threshold.</p>` +
      `<p class="trace">${traceLine(trace)}</p>`
    );
  }
  const items = docs
    .map((doc, i) => {
      const body =
        doc.text === undefined
          ? ""
          : `<pre class="doc-text">${escapeHtml(doc.text)}</pre>`;
      return (
        `<li class="preview-item" data-doc-id="${escapeHtml(doc.doc_id)}">` +
        `<details><summary>` +
        `<span class="rank">${i + 1}</span> ` +
        `<span class="module-name">${escapeHtml(doc.module_name)}</span> ` +
        `<span class="relevance">${doc.relevance.toFixed(3)}</span>` +
        `</summary>${body}</details></li>`
      );
    })
    .join("");
  return `<ol class="preview-list">${items}</ol><p class="trace">${traceLine(trace)}</p>`;
}

/** Sidebar of documents actually used for the last generation. */
export function renderSidebar(retrieved: GenerateResponse["retrieved"]): string {
  if (retrieved.length === 0) {
    return `<p class="empty-state">No context documents were used.</p>`;
  }
  const items = retrieved
    .map((doc) => {
      const evicted = doc.evicted ? ` <span class="evicted">(evicted)</span>` : "";
      return (
        `<li class="sidebar-item" data-doc-id="${escapeHtml(doc.doc_id)}">` +
        `${escapeHtml(doc.module_name)} ` +
        `<span class="relevance">${doc.relevance.toFixed(3)}</span>${evicted}</li>`
      );
    })
    .join("");
  return `<ul class="sidebar-list">${items}</ul>`;
}

export function renderResultPanel(response: GenerateResponse): string {
  const warnings =
    response.warnings.length === 0
      ? ""
      : `<ul class="warnings">${response.warnings
          .map((w) => `<li>${escapeHtml(w)}</li>`)
          .join("")}</ul>`;
  return (
    `<p class="source">extracted via ${escapeHtml(response.source)}</p>` +
    warnings +
    `<pre class="code"><code>${escapeHtml(response.code)}</code></pre>`
  );
}

export function renderTimings(timings: Record<string, number>): string {
  const parts = Object.entries(timings)
    .map(([k, v]) => `${escapeHtml(k)} ${(v * 1000).toFixed(1)} ms`)
    .join(" &middot; ");
  return `<p class="timings">${parts}</p>`;
}

/** Session history, oldest first, each turn expandable. */
export function renderHistory(history: HistoryTurn[]): string {
  if (history.length === 0) {
    return `<p class="empty-state">No generations yet this session.</p>`;
  }
  const items = history
    .map(
      (h) =>
        `<li class="history-item" data-turn="${h.turn}">` +
        `<details><summary>#${h.turn} ${escapeHtml(h.query)}</summary>` +
        `<pre class="code"><code>${escapeHtml(h.response.code)}</code></pre>` +
        `</details></li>`,
    )
    .join("");
  return `<ol class="history-list">${items}</ol>`;
}

export function renderError(message: string, fields: string[] = []): string {
  const suffix =
    fields.length === 0 ? "" : ` <span class="fields">(${fields.map(escapeHtml).join(", ")})</span>`;
  return `<p class="error">${escapeHtml(message)}${suffix}</p>`;
}
