import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { formatImpact } from "../src/format.js";
import { applyResponse, beginRequest, createState, setSlider } from "../src/state.js";
import { buildWhatIfView } from "../src/view.js";
import type { WhatIfResponse } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture: WhatIfResponse = JSON.parse(
  readFileSync(join(here, "..", "fixtures", "whatif.json"), "utf-8"),
);

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

function stateWithFixture() {
  let state = createState(FEATURES);
  state = { ...state, modelId: fixture.model_id, datasetId: fixture.dataset_id };
  state = setSlider(state, "lean_solvent_temp", -20);
  state = beginRequest(state);
  return applyResponse(state, state.latestRequestId, fixture);
}

describe("what-if view against the recorded fixture", () => {
  const view = buildWhatIfView(stateWithFixture());

  it("displays the fixture's impact percent to two decimals", () => {
    const expected = formatImpact(fixture.impact_pct);
    expect(view.impactLabel).toBe(expected);
    // Two decimals, signed, e.g. "+20.86%".
    expect(view.impactLabel).toMatch(/^[+-]\d+\.\d{2}%$/);
    const shown = Number(view.impactLabel!.replace("%", ""));
    expect(Math.abs(shown - fixture.impact_pct)).toBeLessThanOrEqual(0.005);
  });

  it("renders both series with the fixture's point counts", () => {
    expect(view.baselinePoints).toBe(fixture.baseline.length);
    expect(view.counterfactualPoints).toBe(fixture.counterfactual.length);
    expect(view.chart).not.toBeNull();
    const baselinePath = view.chart!.paths.find((p) => p.name === "baseline")!;
    const counterfactualPath = view.chart!.paths.find(
      (p) => p.name === "counterfactual",
    )!;
    expect(baselinePath.points).toBe(fixture.baseline.length);
    expect(counterfactualPath.points).toBe(fixture.counterfactual.length);
    // One path command per point.
    expect((baselinePath.d.match(/[ML]/g) ?? []).length).toBe(fixture.baseline.length);
  });

  it("shows the target and highlights the adjusted feature", () => {
    expect(view.target).toBe(fixture.target);
    expect(view.activeFeatures).toEqual(["lean_solvent_temp"]);
  });

  it("keeps submission enabled with one active slider", () => {
    expect(view.submitEnabled).toBe(true);
    expect(view.submitMessage).toBeNull();
  });
});

describe("arity rule in the rendered view", () => {
  it("three nonzero sliders disable submission with an explanation", () => {
    let state = createState(FEATURES);
    state = { ...state, modelId: "m", datasetId: "d" };
    state = setSlider(state, "fg_temp", 5);
    state = setSlider(state, "upper_ww_temp", 10);
    state = setSlider(state, "lower_ww_flow", -5);
    const view = buildWhatIfView(state);
    expect(view.submitEnabled).toBe(false);
    expect(view.submitMessage).toMatch(/at most 2/);
  });
});

describe("identity scenario", () => {
  it("zero impact renders as +0.00%-style neutral label", () => {
    const zero: WhatIfResponse = {
      ...fixture,
      impact_pct: 0,
      counterfactual: fixture.baseline,
    };
    let state = createState(FEATURES);
    state = { ...state, modelId: "m", datasetId: "d" };
    state = beginRequest(state);
    state = applyResponse(state, state.latestRequestId, zero);
    const view = buildWhatIfView(state);
    expect(view.impactLabel).toBe("0.00%");
    expect(view.impactSign).toBe("zero");
    // Identical series produce identical SVG paths.
    const [a, b] = view.chart!.paths;
    expect(a.d).toBe(b.d);
  });
});
