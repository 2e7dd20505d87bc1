/** Client-side mirrors of the review API payloads. Never mutated locally. */

export type Group = "A" | "B" | "C";

export interface SourceRow {
  source_id: string;
  display_name: string;
  root_path: string;
  format_tag: string;
  category: string;
  group: Group | null;
}

export interface TurnRecord {
  role: "human" | "assistant";
  text: string;
}

export interface SampleRecord {
  id: string;
  source_id: string;
  category: string;
  media: string[];
  turns: TurnRecord[];
  provenance: "original" | "rewritten";
  parent_id?: string;
}

export interface VerdictRecord {
  sample_id: string;
  verdict: "Keep" | "Discard";
  attempts: number;
  flagged: boolean;
}

export interface ScoreRecord {
  sample_id: string;
  source_id: string;
  provenance: string;
  content: number | null;
  relevance: number | null;
}

export interface LineageChild {
  sample: SampleRecord;
  verdict: VerdictRecord | null;
  score: ScoreRecord | null;
}

export interface LineageResponse {
  original: SampleRecord;
  children: LineageChild[];
  original_score: ScoreRecord | null;
}

export interface AgreementPair {
  rater_a: string;
  rater_b: string;
  kappa: number;
}

export interface AgreementReport {
  kind: "agreement";
  raters: string[];
  pairs: AgreementPair[];
  items_per_rater: Record<string, number>;
  human_mean: number | null;
  substituted_mean: number | null;
  per_combination?: Record<string, number>;
  reason?: string;
}

export interface FilterRateRow {
  category: string;
  before: number;
  after: number;
  rate: number;
  pct: number;
}

export interface FilterRateReport {
  kind: "filter_rates";
  rows: FilterRateRow[];
}
