/** Browser bootstrap: wires the controller to the DOM. */

import { SessionApi } from "./api.js";
import { AnnotatorApp } from "./app.js";
import { canLabel, type ViewState } from "./state.js";
import { renderDigit, renderScatter } from "./scatter.js";
import { renderSparkline } from "./sparkline.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function render(view: ViewState): void {
  renderScatter(el<HTMLCanvasElement>("scatter"), view);
  renderSparkline(el<HTMLCanvasElement>("sparkline"), view.accuracySparkline);

  const digitPanel = el<HTMLCanvasElement>("digit");
  digitPanel.style.display = view.pendingImage ? "block" : "none";
  if (view.pendingImage) renderDigit(digitPanel, view.pendingImage);

  const acc = view.accuracySparkline.at(-1);
  el("status").textContent = view.completed
    ? "all points labeled"
    : view.pending !== null
      ? `label node ${view.pending}`
      : "requesting query...";
  el("accuracy").textContent = acc !== undefined ? `accuracy ${(100 * acc).toFixed(1)}%` : "";
  el("meta").textContent = `${view.datasetName} | ${view.model}-${view.acquisition} | step ${view.history.length}`;

  const err = el("error");
  err.textContent = view.lastError ?? "";
  err.style.display = view.lastError ? "block" : "none";

  const history = el("history");
  history.innerHTML = "";
  for (const h of [...view.history].reverse().slice(0, 25)) {
    const li = document.createElement("li");
    li.textContent = `#${h.step}: node ${h.index} -> ${h.label > 0 ? "+1" : "-1"}`;
    history.appendChild(li);
  }

  const enabled = canLabel(view);
  el<HTMLButtonElement>("label-pos").disabled = !enabled;
  el<HTMLButtonElement>("label-neg").disabled = !enabled;
}

async function boot(): Promise<void> {
  const api = new SessionApi("");
  const auto = el<HTMLInputElement>("auto-advance");
  const app = new AnnotatorApp(api, { autoAdvance: auto.checked }, render);
  auto.addEventListener("change", () => {
    app.options.autoAdvance = auto.checked;
  });

  el<HTMLButtonElement>("label-pos").addEventListener("click", () => void app.submitLabel(1));
  el<HTMLButtonElement>("label-neg").addEventListener("click", () => void app.submitLabel(-1));
  el<HTMLButtonElement>("next-query").addEventListener("click", () => void app.requestQuery());

  el<HTMLButtonElement>("create").addEventListener("click", () => {
    const model = el<HTMLSelectElement>("model").value;
    const acquisition = el<HTMLSelectElement>("acquisition").value;
    void app.start({
      dataset: { name: "checkerboard", n: 2000, seed: 0 },
      model,
      acquisition,
      seed_labels: { per_class: 5, seed: 0 },
    });
  });

  const existing = new URLSearchParams(location.search).get("session");
  if (existing) await app.attach(existing);
}

void boot();
