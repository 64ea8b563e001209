/** DOM wiring. All state transitions and markup come from the pure modules;
 * this file only reads controls, calls the API, and paints containers.
 */

import { ApiClient, ApiError } from "./api.js";
import type { SessionState } from "./state.js";
import {
  beginGeneration,
  beginPreview,
  completeGeneration,
  completePreview,
  failGeneration,
  failPreview,
  generateRequest,
  initialState,
  retrievalPayload,
  setApiKey,
  setKnob,
  setProvider,
  setProviders,
  setQuery,
} from "./state.js";
import {
  renderError,
  renderHistory,
  renderPreviewList,
  renderResultPanel,
  renderSidebar,
  renderTimings,
} from "./render.js";

export interface App {
  state(): SessionState;
  preview(): Promise<void>;
  generate(): Promise<void>;
  /** Resolves when the most recently started action has settled. */
  lastAction(): Promise<void>;
}

// request field name -> control id, for validation highlighting
const FIELD_IDS: Record<string, string> = {
  query: "query",
  provider: "provider",
  tau: "tau",
  alpha: "alpha",
  k_max: "k-max",
  pool_size: "pool-size",
  temperature: "temperature",
  top_p: "top-p",
  max_new_tokens: "max-tokens",
};

export function init(doc: Document, client: ApiClient): App {
  function $<T extends HTMLElement>(id: string): T {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  }

  const queryEl = $<HTMLTextAreaElement>("query");
  const providerEl = $<HTMLSelectElement>("provider");
  const apiKeyEl = $<HTMLInputElement>("api-key");
  const previewBtn = $<HTMLButtonElement>("preview-btn");
  const generateBtn = $<HTMLButtonElement>("generate-btn");
  const copyBtn = $<HTMLButtonElement>("copy-btn");
  const previewList = $<HTMLElement>("preview-list");
  const codePanel = $<HTMLElement>("code-panel");
  const timingsEl = $<HTMLElement>("timings");
  const sidebarEl = $<HTMLElement>("sidebar");
  const historyEl = $<HTMLElement>("history");
  const errorBanner = $<HTMLElement>("error-banner");
  const healthLine = $<HTMLElement>("health-line");

  const knobEls = {
    ragEnabled: $<HTMLInputElement>("rag-enabled"),
    tau: $<HTMLInputElement>("tau"),
    alpha: $<HTMLInputElement>("alpha"),
    kMax: $<HTMLInputElement>("k-max"),
    poolSize: $<HTMLInputElement>("pool-size"),
    temperature: $<HTMLInputElement>("temperature"),
    topP: $<HTMLInputElement>("top-p"),
    maxTokens: $<HTMLInputElement>("max-tokens"),
  };

  let state = initialState();
  let last: Promise<void> = Promise.resolve();

  function highlightFields(fields: string[]): void {
    for (const id of Object.values(FIELD_IDS)) {
      doc.getElementById(id)?.classList.remove("invalid");
    }
    for (const field of fields) {
      const id = FIELD_IDS[field];
      if (id) doc.getElementById(id)?.classList.add("invalid");
    }
  }

  function paint(): void {
    if (state.previewError) {
      previewList.innerHTML = renderError(state.previewError);
    } else if (state.preview) {
      previewList.innerHTML = renderPreviewList(state.preview.retrieved, state.preview.trace);
    }
    if (state.result) {
      codePanel.innerHTML = renderResultPanel(state.result);
      timingsEl.innerHTML = renderTimings(state.result.timings);
      sidebarEl.innerHTML = renderSidebar(state.result.retrieved);
    }
    historyEl.innerHTML = renderHistory(state.history);
    if (state.error) {
      errorBanner.innerHTML = renderError(state.error, state.errorFields);
      errorBanner.hidden = false;
    } else {
      errorBanner.innerHTML = "";
      errorBanner.hidden = true;
    }
    highlightFields(state.errorFields);
    generateBtn.disabled = state.generating;
  }

  function update(next: SessionState): void {
    state = next;
    paint();
  }

  function syncKnobsFromControls(): void {
    let s = state;
    s = setKnob(s, "ragEnabled", knobEls.ragEnabled.checked);
    s = setKnob(s, "tau", Number(knobEls.tau.value));
    s = setKnob(s, "alpha", Number(knobEls.alpha.value));
    s = setKnob(s, "kMax", Number(knobEls.kMax.value));
    s = setKnob(s, "poolSize", Number(knobEls.poolSize.value));
    s = setKnob(s, "temperature", Number(knobEls.temperature.value));
    s = setKnob(s, "topP", Number(knobEls.topP.value));
    s = setKnob(s, "maxTokens", Number(knobEls.maxTokens.value));
    state = s;
  }

  async function doPreview(): Promise<void> {
    syncKnobsFromControls();
    update(setQuery(state, queryEl.value));
    if (!state.query.trim()) {
      previewList.innerHTML = `<p class="empty-state">Enter a query to preview retrieval.</p>`;
      return;
    }
    const [next, seq] = beginPreview(state);
    update(next);
    try {
      const resp = await client.retrieve(state.query, retrievalPayload(state.knobs));
      update(completePreview(state, seq, resp));
    } catch (err) {
      update(failPreview(state, seq, describe(err)));
    }
  }

  async function doGenerate(): Promise<void> {
    if (state.generating) return;
    syncKnobsFromControls();
    update(setQuery(state, queryEl.value));
    update(setApiKey(state, apiKeyEl.value));
    if (!state.query.trim()) {
      update(failGeneration(state, "query must not be empty", ["query"]));
      return;
    }
    update(beginGeneration(state));
    try {
      const resp = await client.generate(generateRequest(state));
      update(completeGeneration(state, resp));
    } catch (err) {
      const fields = err instanceof ApiError ? err.fields : [];
      update(failGeneration(state, describe(err), fields));
    }
  }

  function describe(err: unknown): string {
    if (err instanceof ApiError) return err.detail;
    return err instanceof Error ? err.message : String(err);
  }

  function track(p: Promise<void>): Promise<void> {
    last = p;
    return p;
  }

  previewBtn.addEventListener("click", () => track(doPreview()));
  generateBtn.addEventListener("click", () => track(doGenerate()));
  copyBtn.addEventListener("click", () => {
    const code = state.result?.code;
    if (code && doc.defaultView?.navigator.clipboard) {
      void doc.defaultView.navigator.clipboard.writeText(code);
    }
  });
  queryEl.addEventListener("input", () => {
    state = setQuery(state, queryEl.value);
  });
  providerEl.addEventListener("change", () => {
    state = setProvider(state, providerEl.value);
  });
  apiKeyEl.addEventListener("input", () => {
    state = setApiKey(state, apiKeyEl.value);
  });
  for (const el of Object.values(knobEls)) {
    el.addEventListener("change", () => {
      syncKnobsFromControls();
      if (queryEl.value.trim()) track(doPreview());
    });
  }

  async function loadHealth(): Promise<void> {
    try {
      const h = await client.health();
      update(setProviders(state, h.providers));
      providerEl.innerHTML = h.providers
        .map((p) => `<option value="${p}">${p}</option>`)
        .join("");
      if (state.provider) providerEl.value = state.provider;
      healthLine.textContent = `index ready: ${h.index_size} documents, dim ${h.dim}`;
    } catch (err) {
      healthLine.textContent = `backend unavailable: ${describe(err)}`;
    }
  }

  paint();
  track(loadHealth());

  return {
    state: () => state,
    preview: () => track(doPreview()),
    generate: () => track(doGenerate()),
    lastAction: () => last,
  };
}
