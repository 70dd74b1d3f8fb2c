import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DEBOUNCE_MS, SuggestScheduler } from "../src/debounce.js";

interface Recorder {
  requests: string[];
  results: Array<[string, string]>;
  errors: string[];
  clears: number;
}

function makeScheduler(
  respond: (query: string) => Promise<string> = (q) => Promise.resolve(`panel:${q}`),
) {
  const rec: Recorder = { requests: [], results: [], errors: [], clears: 0 };
  const scheduler = new SuggestScheduler<string>({
    request: (query) => {
      rec.requests.push(query);
      return respond(query);
    },
    onResult: (query, payload) => rec.results.push([query, payload]),
    onError: (query) => rec.errors.push(query),
    onClear: () => (rec.clears += 1),
  });
  return { scheduler, rec };
}

describe("live suggest scheduling", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("issues no request for empty input", async () => {
    const { scheduler, rec } = makeScheduler();
    scheduler.update("");
    scheduler.update("   ");
    await vi.advanceTimersByTimeAsync(10 * DEBOUNCE_MS);
    expect(rec.requests).toEqual([]);
    expect(rec.clears).toBe(2);
  });

  it("waits out the debounce window before requesting", async () => {
    const { scheduler, rec } = makeScheduler();
    scheduler.update("send email");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS - 1);
    expect(rec.requests).toEqual([]);
    await vi.advanceTimersByTimeAsync(1);
    expect(rec.requests).toEqual(["send email"]);
    expect(rec.results).toEqual([["send email", "panel:send email"]]);
  });

  it("collapses rapid keystrokes into one request for the newest draft", async () => {
    const { scheduler, rec } = makeScheduler();
    for (const draft of ["s", "se", "sen", "send"]) {
      scheduler.update(draft);
      await vi.advanceTimersByTimeAsync(50);
    }
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(rec.requests).toEqual(["send"]);
  });

  it("clearing the input cancels a pending request", async () => {
    const { scheduler, rec } = makeScheduler();
    scheduler.update("send");
    await vi.advanceTimersByTimeAsync(100);
    scheduler.update("");
    await vi.advanceTimersByTimeAsync(10 * DEBOUNCE_MS);
    expect(rec.requests).toEqual([]);
    expect(rec.clears).toBe(1);
  });

  it("drops responses of superseded requests (latest wins)", async () => {
    const pending = new Map<string, (value: string) => void>();
    const { scheduler, rec } = makeScheduler(
      (query) => new Promise((resolve) => pending.set(query, resolve)),
    );
    scheduler.update("first");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    scheduler.update("second");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(rec.requests).toEqual(["first", "second"]);
    // The stale response lands after the newer request was issued.
    pending.get("first")!("panel:first");
    pending.get("second")!("panel:second");
    await vi.advanceTimersByTimeAsync(0);
    expect(rec.results).toEqual([["second", "panel:second"]]);
  });

  it("reports failures only for the newest request", async () => {
    const { scheduler, rec } = makeScheduler(() => Promise.reject(new Error("down")));
    scheduler.update("send email");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(rec.errors).toEqual(["send email"]);
    expect(rec.results).toEqual([]);
  });
});
