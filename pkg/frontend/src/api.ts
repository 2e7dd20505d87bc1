/** Thin typed client over the documented review API. All state lives server-side. */

import type {
  AgreementReport,
  FilterRateReport,
  Group,
  LineageResponse,
  SampleRecord,
  SourceRow,
} from "./types";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export const api = {
  sources(): Promise<SourceRow[]> {
    return request("/api/sources");
  },

  screeningBatch(sourceId: string, n: number, seed: number): Promise<SampleRecord[]> {
    return request(
      `/api/sources/${encodeURIComponent(sourceId)}/samples?n=${n}&seed=${seed}`,
    );
  },

  assignGroup(sourceId: string, group: Group, raterId: string): Promise<unknown> {
    return request(`/api/sources/${encodeURIComponent(sourceId)}/group`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ group, rater_id: raterId }),
    });
  },

  samples(provenance: string, n: number, seed: number): Promise<SampleRecord[]> {
    return request(`/api/samples?provenance=${provenance}&n=${n}&seed=${seed}`);
  },

  lineage(sampleId: string): Promise<LineageResponse> {
    return request(`/api/samples/${encodeURIComponent(sampleId)}/lineage`);
  },

  postLabel(sampleId: string, raterId: string, label: "good" | "bad"): Promise<unknown> {
    return request("/api/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sample_id: sampleId, rater_id: raterId, label }),
    });
  },

  agreement(): Promise<AgreementReport> {
    return request("/api/agreement");
  },

  filterRates(): Promise<FilterRateReport> {
    return request("/api/reports/filter-rates");
  },
};

export type Api = typeof api;
