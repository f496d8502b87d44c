/** DOM wiring for the what-if explorer. All numerical content comes from the
 * API; this file only moves state between widgets and view models.
 */

import { ApiError, listDatasets, listModels, postSweep, postWhatIf } from "./api.js";
import { chartSvg } from "./chart.js";
import { buildHeatmap, heatmapErrorHtml, heatmapHtml } from "./heatmap.js";
import {
  applyError,
  applyResponse,
  beginRequest,
  buildRequest,
  createState,
  resetSliders,
  setSlider,
  SLIDER_MAX,
  SLIDER_MIN,
  SLIDER_STEP,
  type WhatIfViewState,
} from "./state.js";
import { buildWhatIfView } from "./view.js";
import type { DatasetInfo, ModelInfo } from "./types.js";

const FEATURES = [
  "fg_inlet_flow",
  "fg_temp",
  "lean_solvent_flow",
  "lean_solvent_temp",
  "upper_ww_flow",
  "upper_ww_temp",
  "lower_ww_flow",
  "lower_ww_temp",
];

let state: WhatIfViewState = createState(FEATURES);
let models: ModelInfo[] = [];
let datasets: DatasetInfo[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderSliders(): void {
  const container = el<HTMLDivElement>("sliders");
  container.innerHTML = "";
  for (const feature of FEATURES) {
    const row = document.createElement("div");
    row.className = "slider-row" + (state.sliders[feature] !== 0 ? " active" : "");

    const label = document.createElement("label");
    label.textContent = feature;
    row.appendChild(label);

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = String(SLIDER_MIN);
    slider.max = String(SLIDER_MAX);
    slider.step = String(SLIDER_STEP);
    slider.value = String(state.sliders[feature]);
    slider.addEventListener("input", () => {
      state = setSlider(state, feature, Number(slider.value), true);
      render();
    });
    row.appendChild(slider);

    const entry = document.createElement("input");
    entry.type = "number";
    entry.min = String(SLIDER_MIN);
    entry.max = String(SLIDER_MAX);
    entry.step = "1";
    entry.value = String(state.sliders[feature]);
    entry.addEventListener("change", () => {
      state = setSlider(state, feature, Number(entry.value), false);
      render();
    });
    row.appendChild(entry);

    const unit = document.createElement("span");
    unit.textContent = "%";
    row.appendChild(unit);

    container.appendChild(row);
  }
}

function renderResult(): void {
  const view = buildWhatIfView(state);
  const impact = el<HTMLDivElement>("impact");
  impact.textContent = view.impactLabel ?? "--";
  impact.className = `impact ${view.impactSign ?? ""}`;
  el<HTMLDivElement>("target-label").textContent = view.target
    ? `${view.target}, average change over the window`
    : "run a scenario to compare forecasts";

  const chartBox = el<HTMLDivElement>("chart");
  chartBox.innerHTML = view.chart ? chartSvg(view.chart) : "";

  const submit = el<HTMLButtonElement>("submit");
  submit.disabled = !view.submitEnabled || view.busy;
  el<HTMLDivElement>("submit-message").textContent =
    view.submitMessage ?? (view.busy ? "computing..." : "");
  el<HTMLDivElement>("error").textContent = view.error ?? "";
}

function render(): void {
  renderSliders();
  renderResult();
}

async function refreshCatalog(): Promise<void> {
  [models, datasets] = await Promise.all([listModels(), listDatasets()]);
  const modelSelect = el<HTMLSelectElement>("model");
  modelSelect.innerHTML = models
    .map((m) => `<option value="${m.id}">${m.id} (${m.architecture})</option>`)
    .join("");
  const datasetSelect = el<HTMLSelectElement>("dataset");
  datasetSelect.innerHTML = datasets
    .map((d) => `<option value="${d.id}">${d.id} (${d.rows} rows)</option>`)
    .join("");
  if (models.length) state.modelId = models[0].id;
  if (datasets.length) {
    state.datasetId = datasets[0].id;
    adoptWindowDefaults();
  }
  render();
}

function adoptWindowDefaults(): void {
  const dataset = datasets.find((d) => d.id === state.datasetId);
  if (!dataset) return;
  const length = Math.min(576, Math.max(48, Math.floor(dataset.rows / 4)));
  state.windowLength = length;
  state.windowStart = dataset.rows - length;
  el<HTMLInputElement>("window-start").value = String(state.windowStart);
  el<HTMLInputElement>("window-length").value = String(state.windowLength);
}

async function submitWhatIf(): Promise<void> {
  state = beginRequest(state);
  const requestId = state.latestRequestId;
  render();
  try {
    const response = await postWhatIf(buildRequest(state));
    state = applyResponse(state, requestId, response);
  } catch (err) {
    const message =
      err instanceof ApiError
        ? err.field
          ? `${err.message} (${err.field})`
          : err.message
        : String(err);
    state = applyError(state, requestId, message);
  }
  render();
}

async function runSweep(kind: "single" | "pair"): Promise<void> {
  const box = el<HTMLDivElement>("heatmap");
  if (!state.modelId || !state.datasetId) return;
  const body = {
    model_id: state.modelId,
    dataset_id: state.datasetId,
    window: { start_index: state.windowStart, length_steps: state.windowLength },
  };
  box.innerHTML = "<p class=\"busy\">sweeping...</p>";
  try {
    const grid =
      kind === "single"
        ? await postSweep(body)
        : await postSweep({
            ...body,
            feature_pair: [
              el<HTMLSelectElement>("pair-a").value,
              el<HTMLSelectElement>("pair-b").value,
            ] as [string, string],
          });
    box.innerHTML = heatmapHtml(buildHeatmap(grid));
  } catch (err) {
    box.innerHTML = heatmapErrorHtml(
      err instanceof ApiError ? err.message : String(err),
    );
  }
}

function wire(): void {
  el<HTMLSelectElement>("model").addEventListener("change", (ev) => {
    state.modelId = (ev.target as HTMLSelectElement).value;
    render();
  });
  el<HTMLSelectElement>("dataset").addEventListener("change", (ev) => {
    state.datasetId = (ev.target as HTMLSelectElement).value;
    adoptWindowDefaults();
    render();
  });
  el<HTMLInputElement>("window-start").addEventListener("change", (ev) => {
    state.windowStart = Number((ev.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("window-length").addEventListener("change", (ev) => {
    state.windowLength = Number((ev.target as HTMLInputElement).value);
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submitWhatIf());
  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    state = resetSliders(state);
    render();
  });
  el<HTMLButtonElement>("sweep-single").addEventListener("click", () =>
    void runSweep("single"),
  );
  el<HTMLButtonElement>("sweep-pair").addEventListener("click", () =>
    void runSweep("pair"),
  );
  const pairA = el<HTMLSelectElement>("pair-a");
  const pairB = el<HTMLSelectElement>("pair-b");
  pairA.innerHTML = FEATURES.map((f) => `<option>${f}</option>`).join("");
  pairB.innerHTML = FEATURES.map((f) => `<option>${f}</option>`).join("");
  pairA.value = "lean_solvent_temp";
  pairB.value = "upper_ww_temp";
}

document.addEventListener("DOMContentLoaded", () => {
  wire();
  render();
  void refreshCatalog();
});
