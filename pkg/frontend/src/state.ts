/**
 * Builder view state and its transitions, kept as pure functions so the
 * accept/fix contract is testable without a DOM.
 *
 * Hallucination flags are a pure function of the /generate payload: the UI
 * performs no detection of its own. Accepting is disabled while any flagged
 * name (step or trigger table) has not been replaced by a catalog name.
 */

import type { GeneratePayload, RetrievePayload, WorkflowDoc } from "./api.js";

export interface StepView {
  name: string;
  order: number;
  parent: number | null;
  properties: Record<string, string>;
  flagged: boolean;
  fixed: boolean;
}

export interface BuilderState {
  queryDraft: string;
  suggestions: RetrievePayload | null;
  offline: boolean;
  workflow: WorkflowDoc | null;
  steps: StepView[];
  triggerName: string | null;
  triggerTable: string | null;
  triggerTableFlagged: boolean;
  triggerTableFixed: boolean;
  valid: boolean;
  raw: string;
  generated: boolean;
}

export function initialState(): BuilderState {
  return {
    queryDraft: "",
    suggestions: null,
    offline: false,
    workflow: null,
    steps: [],
    triggerName: null,
    triggerTable: null,
    triggerTableFlagged: false,
    triggerTableFixed: false,
    valid: false,
    raw: "",
    generated: false,
  };
}

export function setDraft(state: BuilderState, draft: string): BuilderState {
  return { ...state, queryDraft: draft };
}

/** Successful /retrieve response replaces the panel and clears any banner. */
export function applySuggestions(state: BuilderState, payload: RetrievePayload): BuilderState {
  return { ...state, suggestions: payload, offline: false };
}

/** Failed /retrieve: banner on, last successful panel preserved. */
export function suggestionsFailed(state: BuilderState): BuilderState {
  return { ...state, offline: true };
}

/** Mirror a /generate payload into view state; flags come from the payload
 * verbatim (one flag per step entry whose name the service reported). */
export function applyGenerate(state: BuilderState, payload: GeneratePayload): BuilderState {
  if (!payload.valid || payload.workflow === null) {
    return {
      ...state,
      workflow: null,
      steps: [],
      triggerName: null,
      triggerTable: null,
      triggerTableFlagged: false,
      triggerTableFixed: false,
      valid: false,
      raw: payload.raw,
      generated: true,
    };
  }
  const flaggedNames = new Set(payload.hallucinated_steps);
  const badTables = new Set(payload.hallucinated_tables);
  const trigger = payload.workflow.trigger;
  const triggerTable = trigger ? trigger.properties["table"] ?? null : null;
  return {
    ...state,
    workflow: payload.workflow,
    steps: payload.workflow.steps.map((step) => ({
      name: step.name,
      order: step.order,
      parent: step.parent,
      properties: step.properties,
      flagged: flaggedNames.has(step.name),
      fixed: false,
    })),
    triggerName: trigger ? trigger.name : null,
    triggerTable,
    triggerTableFlagged: triggerTable !== null && badTables.has(triggerTable),
    triggerTableFixed: false,
    valid: true,
    raw: payload.raw,
    generated: true,
  };
}

/** Replace a flagged step's name; only names from /catalog/steps are legal. */
export function fixStep(
  state: BuilderState,
  index: number,
  newName: string,
  catalogStepNames: readonly string[],
): BuilderState {
  if (index < 0 || index >= state.steps.length) {
    throw new Error(`no step at index ${index}`);
  }
  if (!catalogStepNames.includes(newName)) {
    throw new Error(`${newName} is not a catalog step`);
  }
  const steps = state.steps.map((step, i) =>
    i === index ? { ...step, name: newName, flagged: false, fixed: true } : step,
  );
  return { ...state, steps };
}

/** Replace a flagged trigger table; only names from /catalog/tables are legal. */
export function fixTriggerTable(
  state: BuilderState,
  newTable: string,
  catalogTableNames: readonly string[],
): BuilderState {
  if (!catalogTableNames.includes(newTable)) {
    throw new Error(`${newTable} is not a catalog table`);
  }
  return {
    ...state,
    triggerTable: newTable,
    triggerTableFlagged: false,
    triggerTableFixed: true,
  };
}

export function unfixedFlagCount(state: BuilderState): number {
  let count = state.steps.filter((s) => s.flagged).length;
  if (state.triggerTableFlagged) {
    count += 1;
  }
  return count;
}

/** Accept is enabled only for a valid workflow with no remaining flags. */
export function canAccept(state: BuilderState): boolean {
  return state.generated && state.valid && unfixedFlagCount(state) === 0;
}

/** The document as currently displayed, with fixes applied. */
export function currentDocument(state: BuilderState): WorkflowDoc | null {
  if (!state.valid || state.workflow === null) {
    return null;
  }
  const trigger = state.workflow.trigger
    ? {
        ...state.workflow.trigger,
        properties:
          state.triggerTable !== null
            ? { ...state.workflow.trigger.properties, table: state.triggerTable }
            : state.workflow.trigger.properties,
      }
    : null;
  return {
    trigger,
    steps: state.steps.map((step) => ({
      name: step.name,
      order: step.order,
      parent: step.parent,
      properties: step.properties,
    })),
  };
}
