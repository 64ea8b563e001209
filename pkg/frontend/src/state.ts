/** Session state and its pure transitions.
 *
 * Everything lives in memory for the current page only: the API key is
 * deliberately part of this transient object and is never handed to any
 * storage API, so closing or reloading the page yields a clean session.
 */

import type {
  GenerateRequest,
  GenerateResponse,
  GenerationOverrides,
  RetrievalOverrides,
  RetrieveResponse,
} from "./api.js";

export interface Knobs {
  ragEnabled: boolean;
  tau: number;
  alpha: number;
  kMax: number;
  poolSize: number;
  temperature: number;
  topP: number;
  maxTokens: number;
}

export const DEFAULT_KNOBS: Knobs = {
  ragEnabled: true,
  tau: 0.55,
  alpha: 1.5,
  kMax: 5,
  poolSize: 10,
  temperature: 0.8,
  topP: 0.95,
  maxTokens: 1500,
};

export interface HistoryTurn {
  turn: number;
  query: string;
  response: GenerateResponse;
}

export interface SessionState {
  provider: string | null;
  providers: string[];
  apiKey: string;
  query: string;
  knobs: Knobs;
  previewSeq: number;
  preview: RetrieveResponse | null;
  previewError: string | null;
  generating: boolean;
  result: GenerateResponse | null;
  error: string | null;
  errorFields: string[];
  history: HistoryTurn[];
}

export function initialState(): SessionState {
  return {
    provider: null,
    providers: [],
    apiKey: "",
    query: "",
    knobs: { ...DEFAULT_KNOBS },
    previewSeq: 0,
    preview: null,
    previewError: null,
    generating: false,
    result: null,
    error: null,
    errorFields: [],
    history: [],
  };
}

export function setQuery(state: SessionState, query: string): SessionState {
  return { ...state, query };
}

export function setApiKey(state: SessionState, apiKey: string): SessionState {
  return { ...state, apiKey };
}

export function setProviders(state: SessionState, providers: string[]): SessionState {
  const provider =
    state.provider && providers.includes(state.provider) ? state.provider : providers[0] ?? null;
  return { ...state, providers: [...providers], provider };
}

export function setProvider(state: SessionState, provider: string): SessionState {
  return { ...state, provider };
}

export function setKnob<K extends keyof Knobs>(
  state: SessionState,
  key: K,
  value: Knobs[K],
): SessionState {
  return { ...state, knobs: { ...state.knobs, [key]: value } };
}

/** Start a preview; the returned seq is the latest-wins token. */
export function beginPreview(state: SessionState): [SessionState, number] {
  const seq = state.previewSeq + 1;
  return [{ ...state, previewSeq: seq }, seq];
}

/** Apply a preview response unless a newer preview has started since. */
export function completePreview(
  state: SessionState,
  seq: number,
  response: RetrieveResponse,
): SessionState {
  if (seq !== state.previewSeq) return state;
  return { ...state, preview: response, previewError: null };
}

export function failPreview(state: SessionState, seq: number, message: string): SessionState {
  if (seq !== state.previewSeq) return state;
  return { ...state, previewError: message };
}

export function beginGeneration(state: SessionState): SessionState {
  return { ...state, generating: true, error: null, errorFields: [] };
}

/** Record a finished generation, retaining the turn in session history. */
export function completeGeneration(
  state: SessionState,
  response: GenerateResponse,
): SessionState {
  const turn: HistoryTurn = {
    turn: state.history.length + 1,
    query: state.query,
    response,
  };
  return {
    ...state,
    generating: false,
    result: response,
    error: null,
    errorFields: [],
    history: [...state.history, turn],
  };
}

export function failGeneration(
  state: SessionState,
  message: string,
  fields: string[] = [],
): SessionState {
  return { ...state, generating: false, error: message, errorFields: fields };
}

export function retrievalPayload(knobs: Knobs): RetrievalOverrides {
  if (!knobs.ragEnabled) return { mode: "disabled" };
  return {
    mode: "dynamic",
    tau: knobs.tau,
    alpha: knobs.alpha,
    k_max: knobs.kMax,
    pool_size: knobs.poolSize,
  };
}

export function generationPayload(knobs: Knobs): GenerationOverrides {
  return {
    temperature: knobs.temperature,
    top_p: knobs.topP,
    max_new_tokens: knobs.maxTokens,
  };
}

/** The /generate request body; the key rides here and nowhere else. */
export function generateRequest(state: SessionState): GenerateRequest {
  const req: GenerateRequest = {
    query: state.query,
    retrieval: retrievalPayload(state.knobs),
    generation: generationPayload(state.knobs),
  };
  if (state.provider) req.provider = state.provider;
  if (state.apiKey) req.session_api_key = state.apiKey;
  return req;
}
