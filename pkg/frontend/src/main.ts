/** DOM wiring: holds the state, delegates everything else. */

import { ApiClient } from "./api.js";
import { SearchController } from "./controller.js";
import { renderPage, renderToggles } from "./render.js";
import {
  applyError,
  initialState,
  toggleCorpus,
  withCorpora,
  type ViewState,
} from "./state.js";

function main(): void {
  const form = document.querySelector<HTMLFormElement>("#search-form");
  const input = document.querySelector<HTMLInputElement>("#search-input");
  const toggles = document.querySelector<HTMLElement>("#toggles");
  const results = document.querySelector<HTMLElement>("#results");
  if (!form || !input || !toggles || !results) {
    throw new Error("page shell is missing a required element");
  }

  // ?api=http://host:port points the client at a non-same-origin service
  const base = new URLSearchParams(window.location.search).get("api") ?? "";
  const api = new ApiClient((url) => fetch(url), base);

  let state: ViewState = initialState();
  const rerender = () => {
    toggles.innerHTML = renderToggles(state);
    results.innerHTML = renderPage(state);
  };
  const update = (change: (s: ViewState) => ViewState) => {
    state = change(state);
    rerender();
  };

  const controller = new SearchController(
    api,
    {
      schedule: (fn, ms) => window.setTimeout(fn, ms),
      cancel: (handle) => window.clearTimeout(handle),
    },
    update,
  );

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const query = input.value.trim();
    if (query) controller.requestSearch(query);
  });

  toggles.addEventListener("change", (event) => {
    const target = event.target as HTMLElement | null;
    const corpusId = target?.dataset.corpus;
    if (corpusId) update((s) => toggleCorpus(s, corpusId));
  });

  api
    .corpora()
    .then((corpora) => update((s) => withCorpora(s, corpora)))
    .catch(() =>
      update((s) => applyError(s, "could not load the corpus list; is the service running?")),
    );
}

main();
