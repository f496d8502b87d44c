/** Wire types for the /api/v1 endpoints. */

export interface ModelInfo {
  id: string;
  target: string;
  architecture: string;
  param_count: number;
  metrics: Record<string, number | string | null> | null;
}

export interface DatasetInfo {
  id: string;
  interval_s: number;
  rows: number;
  start: string;
  end: string;
  provenance: string;
}

export interface WindowSpec {
  start_index: number;
  length_steps: number;
}

export interface InterventionBody {
  feature: string;
  /** Fractional delta in [-0.20, 0.20]; sliders hold percent and divide by 100. */
  delta_pct: number;
}

export interface WhatIfRequest {
  model_id: string;
  dataset_id: string;
  window: WindowSpec;
  interventions: InterventionBody[];
}

export interface WhatIfResponse {
  model_id: string;
  dataset_id: string;
  target: string;
  window: WindowSpec;
  interventions: InterventionBody[];
  timestamps: string[];
  baseline: number[];
  counterfactual: number[];
  impact_pct: number;
}

export interface SweepResponse {
  kind: "single" | "pair";
  target: string;
  row_labels: string[];
  deltas: number[];
  cells: (number | null)[][];
  window: WindowSpec;
  feature_pair: [string, string] | null;
  errors: Record<string, string>;
}

export interface ApiErrorBody {
  error: { code: string; message: string; field?: string };
}
