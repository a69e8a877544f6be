/** Citation helpers: timestamp math and link construction. */

import type { CitationOut } from "./types";

const TIME_PATTERN = /^(\d{1,4}):([0-5]\d)$/;

/** "04:30" -> 270. Throws on anything that is not MM:SS. */
export function mmssToSeconds(time: string): number {
  const match = TIME_PATTERN.exec(time.trim());
  if (!match) {
    throw new Error(`not an MM:SS timestamp: ${time}`);
  }
  return parseInt(match[1], 10) * 60 + parseInt(match[2], 10);
}

export function secondsToMmss(total: number): string {
  const minutes = Math.floor(Math.max(total, 0) / 60);
  const seconds = Math.max(total, 0) % 60;
  return `${String(minutes).padStart(2, "0")}:${String(seconds).padStart(2, "0")}`;
}

function fill(template: string, values: Record<string, string>): string {
  return template.replace(/\{(\w+)\}/g, (whole, name) =>
    name in values ? values[name] : whole,
  );
}

/**
 * Build the href for a citation. Video links carry a start-time parameter
 * derived from the cited MM:SS; section links carry the section id.
 */
export function citationHref(
  citation: CitationOut,
  videoUrlTemplate: string,
  sectionUrlTemplate: string,
): string | null {
  if (citation.kind === "video") {
    if (!citation.video_id || !citation.time) return null;
    const seconds = citation.time_seconds ?? mmssToSeconds(citation.time);
    return fill(videoUrlTemplate, {
      video_id: citation.video_id,
      seconds: String(seconds),
    });
  }
  if (!citation.section_id) return null;
  return fill(sectionUrlTemplate, {
    section_id: encodeURIComponent(citation.section_id),
  });
}

export function citationText(citation: CitationOut): string {
  if (citation.kind === "video") {
    return `Video ${citation.label}, time ${citation.time ?? "?"}`;
  }
  const title = citation.section_title ? ` (${citation.section_title})` : "";
  return `Section ${citation.label}${title}`;
}

/** Matches the bracketed reference spans of a synthesized reply,
 *  bold (`[**...**]`) or plain. */
export const CITATION_SPAN = /\[\s*(?:\*\*)?\s*((?:Video|Section)[^\[\]]*?)\s*(?:\*\*)?\s*\]/g;

export interface ParsedReference {
  kind: "video" | "section";
  label: number;
  time?: string;
  title?: string;
}

const VIDEO_REF = /^Video\s+(\d+)\s*,\s*time\s+(\d{1,4}:[0-5]\d)$/;
const SECTION_REF = /^Section\s+(\d+)\s*(?:\((.+)\))?$/;

/** One reference of a span ("Video 3, time 03:14" or "Section 1 (...)"). */
export function parseReference(text: string): ParsedReference | null {
  const cleaned = text.trim().replace(/^\*+|\*+$/g, "").trim();
  const video = VIDEO_REF.exec(cleaned);
  if (video) {
    return { kind: "video", label: parseInt(video[1], 10), time: video[2] };
  }
  const section = SECTION_REF.exec(cleaned);
  if (section) {
    return {
      kind: "section",
      label: parseInt(section[1], 10),
      title: section[2]?.trim(),
    };
  }
  return null;
}
