/** What-if view state and its pure transition functions.
 *
 * All numbers shown in the view come straight from API payloads; this module
 * only clamps slider positions, enforces the two-intervention arity, and
 * discards stale responses (a response is applied only if it answers the
 * most recently issued request).
 */

import type { WhatIfRequest, WhatIfResponse, InterventionBody } from "./types.js";

export const SLIDER_MIN = -20;
export const SLIDER_MAX = 20;
export const SLIDER_STEP = 5;
export const MAX_INTERVENTIONS = 2;

export interface WhatIfViewState {
  modelId: string | null;
  datasetId: string | null;
  windowStart: number;
  windowLength: number;
  /** Percent positions, feature -> [-20, 20]. */
  sliders: Record<string, number>;
  lastResponse: WhatIfResponse | null;
  requestInFlight: boolean;
  /** Monotone id of the most recently issued request. */
  latestRequestId: number;
  /** Id of the request whose response the view currently shows. */
  appliedRequestId: number;
  error: string | null;
}

export function createState(features: string[]): WhatIfViewState {
  const sliders: Record<string, number> = {};
  for (const f of features) sliders[f] = 0;
  return {
    modelId: null,
    datasetId: null,
    windowStart: 0,
    windowLength: 576,
    sliders,
    lastResponse: null,
    requestInFlight: false,
    latestRequestId: 0,
    appliedRequestId: 0,
    error: null,
  };
}

export function clampPercent(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, value));
}

/** Slider drags snap to the 5% grid; typed values stay free within range. */
export function snapPercent(value: number): number {
  return clampPercent(Math.round(value / SLIDER_STEP) * SLIDER_STEP);
}

export function setSlider(
  state: WhatIfViewState,
  feature: string,
  percent: number,
  snap = false,
): WhatIfViewState {
  if (!(feature in state.sliders)) return state;
  const value = snap ? snapPercent(percent) : clampPercent(percent);
  return { ...state, sliders: { ...state.sliders, [feature]: value } };
}

export function resetSliders(state: WhatIfViewState): WhatIfViewState {
  const sliders: Record<string, number> = {};
  for (const f of Object.keys(state.sliders)) sliders[f] = 0;
  return { ...state, sliders };
}

export function nonzeroSliders(state: WhatIfViewState): [string, number][] {
  return Object.entries(state.sliders).filter(([, v]) => v !== 0);
}

export interface SubmitGate {
  enabled: boolean;
  reason: string | null;
}

export function submitGate(state: WhatIfViewState): SubmitGate {
  if (!state.modelId || !state.datasetId) {
    return { enabled: false, reason: "Select a model and a dataset first." };
  }
  const active = nonzeroSliders(state).length;
  if (active > MAX_INTERVENTIONS) {
    return {
      enabled: false,
      reason:
        `${active} inputs are adjusted; the engine evaluates at most ` +
        `${MAX_INTERVENTIONS} simultaneous interventions. Reset one.`,
    };
  }
  return { enabled: true, reason: null };
}

export function buildRequest(state: WhatIfViewState): WhatIfRequest {
  const interventions: InterventionBody[] = nonzeroSliders(state).map(
    ([feature, percent]) => ({ feature, delta_pct: percent / 100 }),
  );
  return {
    model_id: state.modelId ?? "",
    dataset_id: state.datasetId ?? "",
    window: { start_index: state.windowStart, length_steps: state.windowLength },
    interventions,
  };
}

export function beginRequest(state: WhatIfViewState): WhatIfViewState {
  return {
    ...state,
    requestInFlight: true,
    error: null,
    latestRequestId: state.latestRequestId + 1,
  };
}

/** Apply a response only if it answers the latest request; stale responses
 * must never overwrite newer ones. */
export function applyResponse(
  state: WhatIfViewState,
  requestId: number,
  response: WhatIfResponse,
): WhatIfViewState {
  if (requestId !== state.latestRequestId || requestId <= state.appliedRequestId) {
    return state;
  }
  return {
    ...state,
    lastResponse: response,
    requestInFlight: false,
    appliedRequestId: requestId,
    error: null,
  };
}

export function applyError(
  state: WhatIfViewState,
  requestId: number,
  message: string,
): WhatIfViewState {
  if (requestId !== state.latestRequestId) return state;
  return { ...state, requestInFlight: false, error: message };
}
