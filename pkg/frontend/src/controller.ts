/** Search orchestration: debounced submits, stale responses discarded. */

import { ApiError, SchemaError, type SearchResponse } from "./api.js";
import { applyError, applyResponse, startSearch, type ViewState } from "./state.js";

export interface SearchApi {
  search(query: string): Promise<SearchResponse>;
}

/** Injectable timer so tests can drive the debounce by hand. */
export interface Scheduler {
  schedule(fn: () => void, delayMs: number): number;
  cancel(handle: number): void;
}

export const DEBOUNCE_MS = 200;

type Updater = (state: ViewState) => ViewState;

export class SearchController {
  private sequence = 0;
  private pendingTimer: number | null = null;

  constructor(
    private readonly api: SearchApi,
    private readonly scheduler: Scheduler,
    private readonly onChange: (update: Updater) => void,
    private readonly debounceMs = DEBOUNCE_MS,
  ) {}

  /** Collapse bursts of submits into one request. */
  requestSearch(query: string): void {
    if (this.pendingTimer !== null) {
      this.scheduler.cancel(this.pendingTimer);
    }
    this.pendingTimer = this.scheduler.schedule(() => {
      this.pendingTimer = null;
      void this.searchNow(query);
    }, this.debounceMs);
  }

  /**
   * Issue the request immediately. Each call takes a ticket; only the
   * newest ticket may touch the state, so an earlier slow response can
   * never overwrite a later one.
   */
  async searchNow(query: string): Promise<void> {
    const ticket = ++this.sequence;
    this.onChange((state) => startSearch(state, query));
    try {
      const response = await this.api.search(query);
      if (ticket === this.sequence) {
        this.onChange((state) => applyResponse(state, response));
      }
    } catch (err) {
      if (ticket !== this.sequence) return;
      const message =
        err instanceof ApiError || err instanceof SchemaError
          ? err.message
          : "search failed: server unreachable";
      this.onChange((state) => applyError(state, message));
    }
  }
}
