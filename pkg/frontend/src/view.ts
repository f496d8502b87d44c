/** View models for the what-if panel: formatted fields only, no math. */

import { buildChart, type ChartView } from "./chart.js";
import { formatImpact } from "./format.js";
import { nonzeroSliders, submitGate, type WhatIfViewState } from "./state.js";

export interface WhatIfViewModel {
  impactLabel: string | null;
  impactSign: "positive" | "negative" | "zero" | null;
  chart: ChartView | null;
  baselinePoints: number;
  counterfactualPoints: number;
  target: string | null;
  activeFeatures: string[];
  submitEnabled: boolean;
  submitMessage: string | null;
  error: string | null;
  busy: boolean;
}

export function buildWhatIfView(state: WhatIfViewState): WhatIfViewModel {
  const gate = submitGate(state);
  const response = state.lastResponse;
  let chart: ChartView | null = null;
  if (response) {
    chart = buildChart(response.timestamps, [
      { name: "baseline", values: response.baseline, cssClass: "line-baseline" },
      {
        name: "counterfactual",
        values: response.counterfactual,
        cssClass: "line-counterfactual",
      },
    ]);
  }
  const impact = response?.impact_pct ?? null;
  return {
    impactLabel: impact === null ? null : formatImpact(impact),
    impactSign:
      impact === null
        ? null
        : impact > 0
          ? "positive"
          : impact < 0
            ? "negative"
            : "zero",
    chart,
    baselinePoints: response?.baseline.length ?? 0,
    counterfactualPoints: response?.counterfactual.length ?? 0,
    target: response?.target ?? null,
    activeFeatures: nonzeroSliders(state).map(([feature]) => feature),
    submitEnabled: gate.enabled,
    submitMessage: gate.reason,
    error: state.error,
    busy: state.requestInFlight,
  };
}
