/** Wire types mirroring the service's query API. */

export type ExpertMode = "tuned" | "prompted_open" | "prompted_commercial" | "bypass";

export interface QueryRequest {
  question: string;
  expert_mode?: ExpertMode;
  k_video?: number;
  k_textbook?: number;
  max_tokens_per_content?: number;
  temperature?: number;
  top_p?: number;
  max_new_tokens?: number;
  num_beams?: number;
}

export interface CitationOut {
  kind: "video" | "section";
  label: number;
  video_id?: string | null;
  start_seconds?: number | null;
  time?: string | null;
  time_seconds?: number | null;
  section_id?: string | null;
  section_title?: string | null;
}

export interface QueryResponse {
  request_id: string;
  expert_mode: string;
  expert_answer?: string | null;
  synthesized_answer: string;
  insufficient: boolean;
  citations: CitationOut[];
  hits: { chunk_id: string; kind: string; score: number; locator: Record<string, unknown>; text: string }[];
  latencies_ms: Record<string, number>;
}

export interface ServerConfig {
  expert_modes: ExpertMode[];
  models: Record<string, string>;
  defaults: {
    expert_mode: ExpertMode;
    k_video: number;
    k_textbook: number;
    max_tokens_per_content: number;
    temperature: number;
    top_p: number;
    max_new_tokens: number;
    num_beams: number;
  };
  bounds: Record<string, Record<string, number>>;
  video_url_template: string;
  section_url_template: string;
  subject_matter: string;
}
