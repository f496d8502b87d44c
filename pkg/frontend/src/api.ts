/** Thin typed client for the /api/v1 endpoints. */

import type {
  ApiErrorBody,
  DatasetInfo,
  ModelInfo,
  SweepResponse,
  WhatIfRequest,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly field: string | null;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody | null) {
    const message = body?.error?.message ?? `request failed with status ${status}`;
    super(message);
    this.status = status;
    this.code = body?.error?.code ?? "unknown";
    this.field = body?.error?.field ?? null;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let body: ApiErrorBody | null = null;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = null;
    }
    throw new ApiError(response.status, body);
  }
  return (await response.json()) as T;
}

export function listModels(): Promise<ModelInfo[]> {
  return request<ModelInfo[]>("/api/v1/models");
}

export function listDatasets(): Promise<DatasetInfo[]> {
  return request<DatasetInfo[]>("/api/v1/datasets");
}

export function postWhatIf(body: WhatIfRequest): Promise<WhatIfResponse> {
  return request<WhatIfResponse>("/api/v1/whatif", {
    method: "POST",
    body: JSON.stringify(body),
  });
}

export function postSweep(body: {
  model_id: string;
  dataset_id: string;
  window: { start_index: number; length_steps: number };
  feature?: string;
  feature_pair?: [string, string];
}): Promise<SweepResponse> {
  return request<SweepResponse>("/api/v1/sweep", {
    method: "POST",
    body: JSON.stringify(body),
  });
}
