import { describe, expect, it } from "vitest";

import type { GeneratePayload } from "../src/api.js";
import {
  applyGenerate,
  applySuggestions,
  canAccept,
  currentDocument,
  fixStep,
  fixTriggerTable,
  initialState,
  suggestionsFailed,
  unfixedFlagCount,
} from "../src/state.js";

const CATALOG_STEPS = ["send_email", "create_report", "notify_user"] as const;
const CATALOG_TABLES = ["incidents", "tickets"] as const;

function payloadWithOneFlaggedStep(): GeneratePayload {
  return {
    workflow: {
      trigger: { name: "daily_trigger", order: 0, parent: null, properties: {} },
      steps: [
        { name: "send_email", order: 0, parent: null, properties: {} },
        { name: "send_slack_message", order: 1, parent: null, properties: {} },
        { name: "create_report", order: 2, parent: null, properties: {} },
      ],
    },
    suggestions: { steps: ["send_email"], tables: [] },
    hallucinated_steps: ["send_slack_message"],
    hallucinated_tables: [],
    valid: true,
    raw: "{}",
  };
}

describe("generate payload mirroring", () => {
  it("flags exactly the step the service flagged and disables accept", () => {
    const state = applyGenerate(initialState(), payloadWithOneFlaggedStep());
    expect(state.steps.map((s) => s.flagged)).toEqual([false, true, false]);
    expect(unfixedFlagCount(state)).toBe(1);
    expect(canAccept(state)).toBe(false);
  });

  it("does no hallucination detection of its own", () => {
    const payload = payloadWithOneFlaggedStep();
    payload.hallucinated_steps = []; // service said everything exists
    const state = applyGenerate(initialState(), payload);
    expect(state.steps.every((s) => !s.flagged)).toBe(true);
    expect(canAccept(state)).toBe(true);
  });

  it("accept stays disabled until the flagged step is replaced by a catalog name", () => {
    let state = applyGenerate(initialState(), payloadWithOneFlaggedStep());
    expect(canAccept(state)).toBe(false);
    expect(() => fixStep(state, 1, "made_up_step", CATALOG_STEPS)).toThrow(
      /not a catalog step/,
    );
    expect(canAccept(state)).toBe(false);
    state = fixStep(state, 1, "notify_user", CATALOG_STEPS);
    expect(state.steps[1].name).toBe("notify_user");
    expect(state.steps[1].fixed).toBe(true);
    expect(canAccept(state)).toBe(true);
  });

  it("flagged trigger tables also block accept until fixed", () => {
    const payload = payloadWithOneFlaggedStep();
    payload.hallucinated_steps = [];
    payload.workflow!.trigger = {
      name: "record_trigger",
      order: 0,
      parent: null,
      properties: { table: "nonexistent" },
    };
    payload.hallucinated_tables = ["nonexistent"];
    let state = applyGenerate(initialState(), payload);
    expect(state.triggerTableFlagged).toBe(true);
    expect(canAccept(state)).toBe(false);
    expect(() => fixTriggerTable(state, "imaginary", CATALOG_TABLES)).toThrow(
      /not a catalog table/,
    );
    state = fixTriggerTable(state, "incidents", CATALOG_TABLES);
    expect(state.triggerTable).toBe("incidents");
    expect(canAccept(state)).toBe(true);
    expect(currentDocument(state)!.trigger!.properties["table"]).toBe("incidents");
  });

  it("invalid output shows raw text and cannot be accepted", () => {
    const payload = payloadWithOneFlaggedStep();
    payload.valid = false;
    payload.workflow = null;
    payload.raw = "gibberish";
    const state = applyGenerate(initialState(), payload);
    expect(state.valid).toBe(false);
    expect(state.raw).toBe("gibberish");
    expect(canAccept(state)).toBe(false);
    expect(currentDocument(state)).toBeNull();
  });

  it("current document reflects applied fixes", () => {
    let state = applyGenerate(initialState(), payloadWithOneFlaggedStep());
    state = fixStep(state, 1, "notify_user", CATALOG_STEPS);
    const doc = currentDocument(state)!;
    expect(doc.steps.map((s) => s.name)).toEqual([
      "send_email",
      "notify_user",
      "create_report",
    ]);
    expect(doc.steps.map((s) => s.order)).toEqual([0, 1, 2]);
  });
});

describe("suggestion panel state", () => {
  it("keeps the last successful panel when the service goes offline", () => {
    let state = initialState();
    const panel = {
      steps: [{ name: "send_email", score: 0.9 }],
      tables: [{ name: "incidents", score: 0.5 }],
    };
    state = applySuggestions(state, panel);
    expect(state.offline).toBe(false);
    state = suggestionsFailed(state);
    expect(state.offline).toBe(true);
    expect(state.suggestions).toEqual(panel);
    state = applySuggestions(state, panel);
    expect(state.offline).toBe(false);
  });
});
