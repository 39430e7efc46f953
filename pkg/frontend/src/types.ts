/** Wire types mirroring the review service payloads (no client-side extras). */

export type Tag = "Missing" | "Verified" | "Pending" | "Human" | "Copy" | "Reranked";

export interface Triad {
  test: string;
  sample: string;
  unit: string;
}

export interface Candidate {
  id: string;
  lexical_score: number;
  semantic_score: number;
  fused_score: number;
  rank: number;
  retrieval_norm: number | null;
  rerank_p: number | null;
  final_score: number | null;
  /** Reference triad, enriched by the service when the record is known. */
  triad: Triad | null;
}

export interface QueueItem {
  query_id: string;
  query: Triad;
  tag: Tag;
  top: Candidate | null;
  candidate_count: number;
}

export interface QueuePage {
  items: QueueItem[];
  status: Tag[];
  limit: number;
  offset: number;
}

export interface ResultDetail {
  query_id: string;
  query: Triad;
  candidates: Candidate[];
  chosen: string | null;
  tag: Tag;
  decided_by: string;
  error: string | null;
}

export interface Stats {
  tags: Record<Tag, number>;
  feedback_events: number;
  results: number;
}

export type Verdict = "accept" | "reject";

export interface VerdictDraft {
  query_id: string;
  candidate_id: string | null;
  verdict: Verdict;
  reviewer: string;
  force?: boolean;
}
