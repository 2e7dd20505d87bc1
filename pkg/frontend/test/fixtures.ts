/** Fixture API server: serves canned payloads over a stubbed fetch, records writes. */

import type {
  AgreementReport,
  FilterRateReport,
  LineageResponse,
  SampleRecord,
  SourceRow,
} from "../src/types";

export const SOURCES: SourceRow[] = [
  { source_id: "charts", display_name: "charts", root_path: "data/charts.jsonl",
    format_tag: "llava_jsonl", category: "Chart", group: "B" },
  { source_id: "docs", display_name: "docs", root_path: "data/docs.jsonl",
    format_tag: "llava_jsonl", category: "OCR", group: null },
  { source_id: "refs", display_name: "refs", root_path: "data/refs.jsonl",
    format_tag: "llava_jsonl", category: "General", group: "A" },
];

export function sample(id: string, provenance: "original" | "rewritten",
                       parentId?: string): SampleRecord {
  return {
    id,
    source_id: "charts",
    category: "Chart",
    media: [`img/${id}.png`],
    turns: [
      { role: "human", text: `<image>\nquestion for ${id}` },
      { role: "assistant", text: `answer for ${id}` },
    ],
    provenance,
    ...(parentId ? { parent_id: parentId } : {}),
  };
}

export const SCREENING_BATCHES: Record<number, SampleRecord[]> = {
  0: [sample("s-a0", "original"), sample("s-a1", "original")],
  1: [sample("s-b0", "original"), sample("s-b1", "original")],
};

export const LABEL_QUEUE: SampleRecord[] = [
  sample("rw0", "rewritten", "p0"),
  sample("rw1", "rewritten", "p0"),
  sample("rw2", "rewritten", "p1"),
];

export function lineageFor(childId: string): LineageResponse {
  const parentId = childId === "rw2" ? "p1" : "p0";
  const siblings = LABEL_QUEUE.filter((s) => s.parent_id === parentId);
  return {
    original: sample(parentId, "original"),
    children: siblings.map((s) => ({
      sample: s,
      verdict: {
        sample_id: s.id,
        verdict: s.id === "rw1" ? "Discard" : "Keep",
        attempts: 1,
        flagged: false,
      },
      score: null,
    })),
    original_score: null,
  };
}

/** The published six-pairwise-kappa fixture with its two panel means. */
export const AGREEMENT_FIXTURE: AgreementReport = {
  kind: "agreement",
  raters: ["E1", "E2", "E3", "model"],
  pairs: [
    { rater_a: "E1", rater_b: "E2", kappa: 0.70 },
    { rater_a: "E1", rater_b: "E3", kappa: 0.42 },
    { rater_a: "E1", rater_b: "model", kappa: 0.73 },
    { rater_a: "E2", rater_b: "E3", kappa: 0.53 },
    { rater_a: "E2", rater_b: "model", kappa: 0.70 },
    { rater_a: "E3", rater_b: "model", kappa: 0.63 },
  ],
  items_per_rater: { E1: 60, E2: 60, E3: 60, model: 60 },
  human_mean: 0.55,
  substituted_mean: 0.6411111111111111,
  per_combination: { E1: 0.62, E2: 0.5933333333333333, E3: 0.71 },
};

/** The published per-category before/after counts with their reported percentages. */
export const FILTER_RATE_FIXTURE: FilterRateReport = {
  kind: "filter_rates",
  rows: [
    { category: "OCR", before: 1104960, after: 498337, rate: 0.549, pct: 54.9 },
    { category: "Chart", before: 7326189, after: 3782029, rate: 0.4838, pct: 48.4 },
    { category: "GeneralQA", before: 1726180, after: 1584308, rate: 0.0822, pct: 8.2 },
    { category: "Caption", before: 244874, after: 199853, rate: 0.1839, pct: 18.4 },
    { category: "Math", before: 590894, after: 518393, rate: 0.1227, pct: 12.3 },
    { category: "Other", before: 1315039, after: 1178275, rate: 0.104, pct: 10.4 },
  ],
};

export interface RecordedWrite {
  path: string;
  body: unknown;
}

export interface FixtureServer {
  writes: RecordedWrite[];
  failNextWrite: boolean;
  sources: SourceRow[];
}

/** Install a fetch stub backed by the fixtures; group POSTs mutate the source list. */
export function installFixtureServer(): FixtureServer {
  const server: FixtureServer = {
    writes: [],
    failNextWrite: false,
    sources: SOURCES.map((s) => ({ ...s })),
  };

  const json = (payload: unknown, status = 200) =>
    new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });

  globalThis.fetch = async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = typeof input === "string" ? input : input.toString();
    const [path, query = ""] = url.split("?");
    const params = new URLSearchParams(query);

    if (init?.method === "POST") {
      const body = JSON.parse(String(init.body));
      if (server.failNextWrite) {
        server.failNextWrite = false;
        return json({ error: "injected write failure" }, 503);
      }
      server.writes.push({ path, body });
      if (path.startsWith("/api/sources/") && path.endsWith("/group")) {
        const sourceId = decodeURIComponent(path.split("/")[3]);
        const row = server.sources.find((s) => s.source_id === sourceId);
        if (!row) return json({ error: `unknown source ${sourceId}` }, 404);
        row.group = body.group;
        return json({ source_id: sourceId, group: body.group });
      }
      if (path === "/api/labels") {
        return json(body);
      }
      return json({ error: `unexpected POST ${path}` }, 404);
    }

    if (path === "/api/sources") return json(server.sources);
    if (path.startsWith("/api/sources/") && path.endsWith("/samples")) {
      const seed = Number(params.get("seed") ?? "0");
      return json(SCREENING_BATCHES[seed % 2]);
    }
    if (path === "/api/samples") return json(LABEL_QUEUE);
    if (path.startsWith("/api/samples/") && path.endsWith("/lineage")) {
      return json(lineageFor(decodeURIComponent(path.split("/")[3])));
    }
    if (path === "/api/agreement") return json(AGREEMENT_FIXTURE);
    if (path === "/api/reports/filter-rates") return json(FILTER_RATE_FIXTURE);
    return json({ error: `unexpected GET ${path}` }, 404);
  };
  return server;
}

/** Let queued microtasks and the view's async boot settle. */
export async function flush(turns = 6): Promise<void> {
  for (let i = 0; i < turns; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
