/** DOM rendering. All hallucination highlighting is driven by the state
 * flags, which in turn mirror the service payload. */

import type { BuilderState, StepView } from "./state.js";
import { canAccept } from "./state.js";

export interface ViewHandlers {
  onFixStep: (index: number, newName: string) => void;
  onFixTable: (newTable: string) => void;
  onRetry: () => void;
  onAccept: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderBanner(container: HTMLElement, offline: boolean): void {
  container.textContent = offline ? "Service unreachable; showing the last suggestions." : "";
  container.classList.toggle("visible", offline);
}

export function renderSuggestions(container: HTMLElement, state: BuilderState): void {
  container.replaceChildren();
  if (!state.suggestions) {
    return;
  }
  const sections: Array<[string, { name: string; score: number }[]]> = [
    ["Steps", state.suggestions.steps],
    ["Tables", state.suggestions.tables],
  ];
  for (const [title, items] of sections) {
    const block = el("div", "suggest-block");
    block.appendChild(el("h3", undefined, title));
    const list = el("ul");
    for (const item of items) {
      const row = el("li");
      row.appendChild(el("span", "suggest-name", item.name));
      row.appendChild(el("span", "suggest-score", item.score.toFixed(3)));
      list.appendChild(row);
    }
    block.appendChild(list);
    container.appendChild(block);
  }
}

function fixDropdown(
  current: string,
  options: readonly string[],
  onPick: (name: string) => void,
): HTMLSelectElement {
  const select = el("select", "fix-select");
  const placeholder = el("option", undefined, `replace ${current}...`);
  placeholder.value = "";
  select.appendChild(placeholder);
  for (const name of options) {
    const option = el("option", undefined, name);
    option.value = name;
    select.appendChild(option);
  }
  select.addEventListener("change", () => {
    if (select.value) {
      onPick(select.value);
    }
  });
  return select;
}

function stepLabel(step: StepView): string {
  return `${step.name}${step.fixed ? " (fixed)" : ""}`;
}

/** Nested tree: children hang under their parent index. */
export function renderWorkflow(
  container: HTMLElement,
  state: BuilderState,
  catalogStepNames: readonly string[],
  catalogTableNames: readonly string[],
  handlers: ViewHandlers,
): void {
  container.replaceChildren();
  if (!state.generated) {
    return;
  }
  if (!state.valid) {
    const panel = el("div", "raw-panel");
    panel.appendChild(el("h3", undefined, "The generator returned unparseable output"));
    panel.appendChild(el("pre", "raw-text", state.raw));
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", handlers.onRetry);
    panel.appendChild(retry);
    container.appendChild(panel);
    return;
  }

  if (state.triggerName !== null) {
    const trigger = el("div", "trigger-row");
    trigger.appendChild(el("span", "trigger-name", state.triggerName));
    if (state.triggerTable !== null) {
      const badge = el(
        "span",
        state.triggerTableFlagged ? "table-badge hallucinated" : "table-badge",
        state.triggerTable,
      );
      trigger.appendChild(badge);
      if (state.triggerTableFlagged) {
        trigger.appendChild(
          fixDropdown(state.triggerTable, catalogTableNames, handlers.onFixTable),
        );
      }
    }
    container.appendChild(trigger);
  }

  const children = new Map<number | null, number[]>();
  state.steps.forEach((step, index) => {
    const key = step.parent;
    const bucket = children.get(key) ?? [];
    bucket.push(index);
    children.set(key, bucket);
  });

  const renderLevel = (parent: number | null): HTMLUListElement => {
    const list = el("ul", "step-level");
    for (const index of children.get(parent) ?? []) {
      const step = state.steps[index];
      const row = el("li", step.flagged ? "step-row hallucinated" : "step-row");
      row.dataset.stepIndex = String(index);
      row.appendChild(el("span", "step-name", stepLabel(step)));
      if (step.flagged) {
        row.appendChild(
          fixDropdown(step.name, catalogStepNames, (name) => handlers.onFixStep(index, name)),
        );
      }
      if (children.has(index)) {
        row.appendChild(renderLevel(index));
      }
      list.appendChild(row);
    }
    return list;
  };
  container.appendChild(renderLevel(null));

  const accept = el("button", "accept", "Accept workflow");
  accept.disabled = !canAccept(state);
  accept.addEventListener("click", handlers.onAccept);
  container.appendChild(accept);
}
