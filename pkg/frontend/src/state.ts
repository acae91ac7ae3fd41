/** View state and its pure transitions. */

import type { CorpusInfo, SearchResponse } from "./api.js";

export interface ViewState {
  query: string;
  /** Corpora advertised by the server, in server order. */
  corpora: ReadonlyArray<CorpusInfo>;
  /** Subset of advertised corpus ids whose sections are shown. */
  visible: ReadonlySet<string>;
  response: SearchResponse | null;
  loading: boolean;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    query: "",
    corpora: [],
    visible: new Set(),
    response: null,
    loading: false,
    error: null,
  };
}

/** Record the advertised corpora; all of them start visible. */
export function withCorpora(state: ViewState, corpora: CorpusInfo[]): ViewState {
  return { ...state, corpora, visible: new Set(corpora.map((c) => c.id)) };
}

/**
 * Flip one corpus section's visibility. Purely client-side: the last
 * response is kept as-is, so no re-query happens. Ids that were never
 * advertised are ignored, preserving visible ⊆ advertised.
 */
export function toggleCorpus(state: ViewState, corpusId: string): ViewState {
  if (!state.corpora.some((c) => c.id === corpusId)) return state;
  const visible = new Set(state.visible);
  if (visible.has(corpusId)) {
    visible.delete(corpusId);
  } else {
    visible.add(corpusId);
  }
  return { ...state, visible };
}

export function startSearch(state: ViewState, query: string): ViewState {
  return { ...state, query, loading: true, error: null };
}

/** Visibility toggles deliberately survive a new response. */
export function applyResponse(state: ViewState, response: SearchResponse): ViewState {
  return { ...state, response, loading: false, error: null };
}

/** A failed or malformed response never renders partially. */
export function applyError(state: ViewState, message: string): ViewState {
  return { ...state, response: null, loading: false, error: message };
}
