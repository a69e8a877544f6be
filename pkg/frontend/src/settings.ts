/**
 * Settings-panel state. Validation mirrors the server's schema bounds, and
 * buildRequest clamps every numeric knob into range, so the client can
 * never emit a request the server would reject.
 */

import { requestFieldBounds, satisfiesBounds, type FieldBounds } from "./schema";
import type { ExpertMode, QueryRequest, ServerConfig } from "./types";

export interface SettingsState {
  expert_mode: ExpertMode;
  k_video: number;
  k_textbook: number;
  max_tokens_per_content: number;
  temperature: number;
  top_p: number;
  max_new_tokens: number;
  num_beams: number;
}

export const DEFAULT_SETTINGS: SettingsState = {
  expert_mode: "tuned",
  k_video: 2,
  k_textbook: 2,
  max_tokens_per_content: 700,
  temperature: 0.2,
  top_p: 1.0,
  max_new_tokens: 1024,
  num_beams: 1,
};

const BOUNDS = requestFieldBounds();

export function fieldBounds(name: keyof QueryRequest): FieldBounds {
  return BOUNDS[name];
}

/** Null when acceptable, else a human-readable reason (used to block the
 *  out-of-range edit client-side). */
export function validateField(name: keyof QueryRequest, value: unknown): string | null {
  const bounds = BOUNDS[name as string];
  if (!bounds) return `unknown setting ${String(name)}`;
  if (satisfiesBounds(value, bounds)) return null;
  const parts: string[] = [];
  if (bounds.enumValues) parts.push(`one of ${bounds.enumValues.join(", ")}`);
  if (bounds.minimum !== undefined) parts.push(`>= ${bounds.minimum}`);
  if (bounds.exclusiveMinimum !== undefined) parts.push(`> ${bounds.exclusiveMinimum}`);
  if (bounds.maximum !== undefined) parts.push(`<= ${bounds.maximum}`);
  if (bounds.integer) parts.push("an integer");
  return `${String(name)} must be ${parts.join(" and ")}`;
}

function clampNumber(value: number, bounds: FieldBounds, fallback: number): number {
  let v = Number.isFinite(value) ? value : fallback;
  if (bounds.integer) v = Math.round(v);
  if (bounds.minimum !== undefined && v < bounds.minimum) v = bounds.minimum;
  if (bounds.maximum !== undefined && v > bounds.maximum) v = bounds.maximum;
  if (bounds.exclusiveMinimum !== undefined && v <= bounds.exclusiveMinimum) {
    // smallest representable step above the open bound for our knobs
    v = bounds.integer ? bounds.exclusiveMinimum + 1 : bounds.exclusiveMinimum + 0.01;
  }
  return v;
}

/** Apply one edit; out-of-range values are rejected (state unchanged). */
export function updateSettings(
  state: SettingsState,
  name: keyof SettingsState,
  value: number | string,
): { state: SettingsState; error: string | null } {
  const error = validateField(name as keyof QueryRequest, value);
  if (error) return { state, error };
  return { state: { ...state, [name]: value } as SettingsState, error: null };
}

/** Beam/max-new-token controls only apply when an expert model runs. */
export function expertControlsVisible(state: SettingsState): boolean {
  return state.expert_mode !== "bypass";
}

export function settingsFromServerDefaults(config: ServerConfig): SettingsState {
  return { ...config.defaults };
}

/**
 * Assemble the request body. Every numeric field is clamped into the
 * schema's bounds and the k pair is kept jointly valid (at least one
 * positive), so the result always passes server validation.
 */
export function buildRequest(state: SettingsState, question: string): QueryRequest {
  const bounds = BOUNDS;
  const questionBounds = bounds["question"];
  let text = question.trim();
  if (questionBounds.maxLength !== undefined && text.length > questionBounds.maxLength) {
    text = text.slice(0, questionBounds.maxLength);
  }

  let kVideo = clampNumber(state.k_video, bounds["k_video"], DEFAULT_SETTINGS.k_video);
  let kTextbook = clampNumber(
    state.k_textbook, bounds["k_textbook"], DEFAULT_SETTINGS.k_textbook,
  );
  if (kVideo + kTextbook < 1) {
    kVideo = 1;
  }

  const mode: ExpertMode = (bounds["expert_mode"].enumValues ?? []).includes(
    state.expert_mode,
  )
    ? state.expert_mode
    : DEFAULT_SETTINGS.expert_mode;

  return {
    question: text,
    expert_mode: mode,
    k_video: kVideo,
    k_textbook: kTextbook,
    max_tokens_per_content: clampNumber(
      state.max_tokens_per_content,
      bounds["max_tokens_per_content"],
      DEFAULT_SETTINGS.max_tokens_per_content,
    ),
    temperature: clampNumber(
      state.temperature, bounds["temperature"], DEFAULT_SETTINGS.temperature,
    ),
    top_p: clampNumber(state.top_p, bounds["top_p"], DEFAULT_SETTINGS.top_p),
    max_new_tokens: clampNumber(
      state.max_new_tokens, bounds["max_new_tokens"], DEFAULT_SETTINGS.max_new_tokens,
    ),
    num_beams: clampNumber(state.num_beams, bounds["num_beams"], DEFAULT_SETTINGS.num_beams),
  };
}

/** Submit is enabled only with a non-empty question and no pending query. */
export function canSubmit(question: string, pending: boolean): boolean {
  return question.trim().length > 0 && !pending;
}
