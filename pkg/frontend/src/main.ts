import { ApiClient } from "./api.js";
import { SuggestScheduler } from "./debounce.js";
import {
  applyGenerate,
  applySuggestions,
  canAccept,
  currentDocument,
  fixStep,
  fixTriggerTable,
  initialState,
  setDraft,
  suggestionsFailed,
} from "./state.js";
import { renderBanner, renderSuggestions, renderWorkflow } from "./view.js";

const api = new ApiClient("");
let state = initialState();
let catalogStepNames: string[] = [];
let catalogTableNames: string[] = [];

const queryInput = document.getElementById("query") as HTMLInputElement;
const generateButton = document.getElementById("generate") as HTMLButtonElement;
const bannerBox = document.getElementById("banner") as HTMLElement;
const suggestBox = document.getElementById("suggestions") as HTMLElement;
const workflowBox = document.getElementById("workflow") as HTMLElement;
const statusBox = document.getElementById("status") as HTMLElement;

function redraw(): void {
  renderBanner(bannerBox, state.offline);
  renderSuggestions(suggestBox, state);
  renderWorkflow(workflowBox, state, catalogStepNames, catalogTableNames, {
    onFixStep: (index, name) => {
      state = fixStep(state, index, name, catalogStepNames);
      redraw();
    },
    onFixTable: (name) => {
      state = fixTriggerTable(state, name, catalogTableNames);
      redraw();
    },
    onRetry: () => void runGenerate(),
    onAccept: () => {
      if (canAccept(state)) {
        statusBox.textContent =
          "Accepted: " + JSON.stringify(currentDocument(state));
      }
    },
  });
}

const scheduler = new SuggestScheduler({
  request: (query) => api.retrieve(query),
  onResult: (_query, payload) => {
    state = applySuggestions(state, payload);
    redraw();
  },
  onError: () => {
    state = suggestionsFailed(state);
    redraw();
  },
  onClear: () => {
    state = { ...state, suggestions: null };
    redraw();
  },
});

async function runGenerate(): Promise<void> {
  const query = state.queryDraft.trim();
  if (!query) {
    return;
  }
  statusBox.textContent = "Generating...";
  try {
    const payload = await api.generate(query);
    state = applyGenerate(state, payload);
    statusBox.textContent = "";
  } catch (error) {
    statusBox.textContent = `Generation failed: ${String(error)}`;
  }
  redraw();
}

async function bootstrap(): Promise<void> {
  try {
    const [steps, tables] = await Promise.all([api.catalogSteps(), api.catalogTables()]);
    catalogStepNames = steps.map((s) => s.name);
    catalogTableNames = tables;
  } catch {
    state = suggestionsFailed(state);
  }
  queryInput.addEventListener("input", () => {
    state = setDraft(state, queryInput.value);
    scheduler.update(queryInput.value);
  });
  generateButton.addEventListener("click", () => void runGenerate());
  redraw();
}

void bootstrap();
