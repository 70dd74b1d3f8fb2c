/**
 * Debounced latest-wins scheduler for live suggestions.
 *
 * Keystrokes are collapsed with a 250 ms debounce; an empty draft clears the
 * panel without issuing a request; responses of superseded requests are
 * dropped so the panel always reflects the newest draft.
 */

export interface SchedulerHooks<T> {
  request: (query: string) => Promise<T>;
  onResult: (query: string, payload: T) => void;
  onError: (query: string, error: unknown) => void;
  onClear: () => void;
  delayMs?: number;
  setTimeoutImpl?: (fn: () => void, ms: number) => unknown;
  clearTimeoutImpl?: (handle: unknown) => void;
}

export const DEBOUNCE_MS = 250;

export class SuggestScheduler<T> {
  private timer: unknown = null;
  private sequence = 0;
  private readonly delay: number;
  private readonly setT: (fn: () => void, ms: number) => unknown;
  private readonly clearT: (handle: unknown) => void;

  constructor(private readonly hooks: SchedulerHooks<T>) {
    this.delay = hooks.delayMs ?? DEBOUNCE_MS;
    this.setT = hooks.setTimeoutImpl ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearT = hooks.clearTimeoutImpl ?? ((handle) => clearTimeout(handle as number));
  }

  /** Call on every draft change. */
  update(draft: string): void {
    if (this.timer !== null) {
      this.clearT(this.timer);
      this.timer = null;
    }
    const query = draft.trim();
    if (query === "") {
      // No request for empty input; the panel empties immediately.
      this.sequence += 1;
      this.hooks.onClear();
      return;
    }
    this.timer = this.setT(() => {
      this.timer = null;
      this.issue(query);
    }, this.delay);
  }

  private issue(query: string): void {
    const ticket = ++this.sequence;
    this.hooks.request(query).then(
      (payload) => {
        if (ticket === this.sequence) {
          this.hooks.onResult(query, payload);
        }
      },
      (error) => {
        if (ticket === this.sequence) {
          this.hooks.onError(query, error);
        }
      },
    );
  }
}
