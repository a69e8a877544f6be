/**
 * Chat application: a turn list, a settings panel kept in lockstep with the
 * server's bounds, and citation links into timestamped lectures and
 * textbook sections. One query in flight at a time.
 */

import { ApiClient, ApiError } from "./api";
import {
  citationHref,
  parseReference,
  type ParsedReference,
} from "./citations";
import { renderMarkdown } from "./markdown";
import {
  buildRequest,
  canSubmit,
  DEFAULT_SETTINGS,
  expertControlsVisible,
  fieldBounds,
  settingsFromServerDefaults,
  updateSettings,
  type SettingsState,
} from "./settings";
import type { CitationOut, QueryResponse, ServerConfig } from "./types";

const INSUFFICIENT_HINT =
  "The context didn't cover this question. Try increasing the number of " +
  "relevant context passages (video lectures / textbook sections) or " +
  "adjusting the options, then ask again.";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Match one parsed span reference to the structured citation payload. */
export function findCitation(
  reference: ParsedReference,
  citations: CitationOut[],
): CitationOut | undefined {
  return citations.find((c) => {
    if (c.kind !== reference.kind || c.label !== reference.label) return false;
    return reference.kind === "video" ? c.time === reference.time : true;
  });
}

export function makeCitationSpanRenderer(
  citations: CitationOut[],
  config: ServerConfig,
): (content: string) => string | null {
  return (content: string) => {
    const parts = content.split(";").map(parseReference);
    if (parts.some((p) => p === null)) return null;
    const anchors = (parts as ParsedReference[]).map((reference) => {
      const citation = findCitation(reference, citations);
      const href = citation
        ? citationHref(citation, config.video_url_template, config.section_url_template)
        : null;
      const label =
        reference.kind === "video"
          ? `Video ${reference.label}, time ${reference.time}`
          : `Section ${reference.label}${reference.title ? ` (${reference.title})` : ""}`;
      const safe = label.replace(/&/g, "&amp;").replace(/</g, "&lt;");
      const safeHref = href?.replace(/&/g, "&amp;").replace(/"/g, "&quot;");
      return safeHref
        ? `<a class="citation" href="${safeHref}" target="_blank" rel="noopener">${safe}</a>`
        : `<span class="citation">${safe}</span>`;
    });
    return `[${anchors.join("; ")}]`;
  };
}

export class ChatApp {
  private settings: SettingsState = { ...DEFAULT_SETTINGS };
  private pending = false;
  private config: ServerConfig | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient = new ApiClient(),
  ) {}

  async start(): Promise<void> {
    this.root.innerHTML = "";
    this.root.append(this.buildLayout());
    try {
      this.config = await this.api.config();
      this.settings = settingsFromServerDefaults(this.config);
      this.syncPanel();
      this.setStatus(`ready (${this.config.subject_matter})`, "ok");
    } catch (error) {
      this.setStatus(`config unavailable: ${String(error)}`, "error");
    }
  }

  // -- layout ------------------------------------------------------------

  private buildLayout(): HTMLElement {
    const wrap = el("div", "layout");

    const main = el("main", "chat");
    const turns = el("div", "turns");
    turns.id = "turns";
    const form = el("form", "ask");
    form.id = "ask-form";
    const input = el("textarea", "question") as HTMLTextAreaElement;
    input.id = "question";
    input.placeholder = "Ask a course question…";
    input.rows = 3;
    const submit = el("button", "submit", "Ask") as HTMLButtonElement;
    submit.id = "submit";
    submit.type = "submit";
    submit.disabled = true;
    input.addEventListener("input", () => this.refreshSubmit());
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitQuestion();
    });
    form.append(input, submit);
    const status = el("div", "status");
    status.id = "status";
    main.append(turns, form, status);

    wrap.append(main, this.buildPanel());
    return wrap;
  }

  private buildPanel(): HTMLElement {
    const panel = el("aside", "panel");
    panel.id = "settings-panel";
    panel.append(el("h2", undefined, "Settings"));

    const modeLabel = el("label", undefined, "Expert model");
    const mode = el("select") as HTMLSelectElement;
    mode.id = "expert_mode";
    for (const m of ["tuned", "prompted_open", "prompted_commercial", "bypass"]) {
      const option = el("option", undefined, m) as HTMLOptionElement;
      option.value = m;
      mode.append(option);
    }
    mode.addEventListener("change", () => this.applyEdit("expert_mode", mode.value));
    modeLabel.append(mode);
    panel.append(modeLabel);

    const numeric: [keyof SettingsState, string, number][] = [
      ["k_video", "Video lectures to retrieve", 1],
      ["k_textbook", "Textbook sections to retrieve", 1],
      ["max_tokens_per_content", "Max context tokens per content", 50],
      ["temperature", "Synthesis temperature", 0.05],
      ["top_p", "Synthesis top-p", 0.05],
      ["max_new_tokens", "Expert max new tokens", 64],
      ["num_beams", "Expert beam count", 1],
    ];
    for (const [name, labelText, step] of numeric) {
      const label = el("label", undefined, labelText);
      const input = el("input") as HTMLInputElement;
      input.type = "number";
      input.id = name;
      input.step = String(step);
      const bounds = fieldBounds(name);
      if (bounds?.minimum !== undefined) input.min = String(bounds.minimum);
      if (bounds?.exclusiveMinimum !== undefined) input.min = String(bounds.exclusiveMinimum);
      if (bounds?.maximum !== undefined) input.max = String(bounds.maximum);
      input.addEventListener("change", () =>
        this.applyEdit(name, input.valueAsNumber),
      );
      label.append(input);
      if (name === "max_new_tokens" || name === "num_beams") {
        label.classList.add("expert-control");
      }
      panel.append(label);
    }

    const error = el("div", "panel-error");
    error.id = "panel-error";
    panel.append(error);
    return panel;
  }

  // -- settings ----------------------------------------------------------

  private applyEdit(name: keyof SettingsState, value: number | string): void {
    const { state, error } = updateSettings(this.settings, name, value);
    this.settings = state;
    const errorBox = this.byId("panel-error");
    errorBox.textContent = error ?? "";
    this.syncPanel();
  }

  private syncPanel(): void {
    for (const [name, value] of Object.entries(this.settings)) {
      const input = document.getElementById(name) as
        | HTMLInputElement
        | HTMLSelectElement
        | null;
      if (input) input.value = String(value);
    }
    const visible = expertControlsVisible(this.settings);
    for (const node of Array.from(
      this.root.querySelectorAll<HTMLElement>(".expert-control"),
    )) {
      node.style.display = visible ? "" : "none";
    }
  }

  // -- querying ------------------------------------------------------------

  private async submitQuestion(): Promise<void> {
    const input = this.byId("question") as HTMLTextAreaElement;
    const question = input.value;
    if (!canSubmit(question, this.pending)) return;
    this.pending = true;
    this.refreshSubmit();
    this.setStatus("thinking…", "busy");
    try {
      const response = await this.api.query(buildRequest(this.settings, question));
      this.renderTurn(question, response);
      input.value = "";
      this.setStatus(
        `answered in ${Math.round(response.latencies_ms["total"] ?? 0)} ms`,
        "ok",
      );
    } catch (error) {
      this.renderErrorBanner(question, error);
      this.setStatus("request failed", "error");
    } finally {
      this.pending = false;
      this.refreshSubmit();
    }
  }

  private renderTurn(question: string, response: QueryResponse): void {
    const turns = this.byId("turns");
    const turn = el("section", "turn");
    turn.append(el("div", "turn-question", question));

    if (response.insufficient) {
      const banner = el("div", "banner banner-insufficient");
      banner.append(el("strong", undefined, "Not enough context. "));
      banner.append(document.createTextNode(INSUFFICIENT_HINT));
      turn.append(banner);
    }

    if (response.expert_answer) {
      const expert = el("details", "expert-answer");
      expert.append(el("summary", undefined, "Expert model answer"));
      const body = el("div");
      body.innerHTML = renderMarkdown(response.expert_answer);
      expert.append(body);
      turn.append(expert);
    }

    const answer = el("div", "turn-answer");
    const renderer = this.config
      ? makeCitationSpanRenderer(response.citations, this.config)
      : undefined;
    answer.innerHTML = renderMarkdown(response.synthesized_answer, renderer);
    turn.append(answer);

    turns.append(turn);
    turn.scrollIntoView({ behavior: "smooth", block: "end" });
  }

  private renderErrorBanner(question: string, error: unknown): void {
    const turns = this.byId("turns");
    const banner = el("div", "banner banner-error");
    const message =
      error instanceof ApiError
        ? `${error.message}${error.stage ? ` (stage: ${error.stage})` : ""}`
        : String(error);
    banner.append(el("span", undefined, `Request failed: ${message} `));
    const retry = el("button", "retry", "Retry") as HTMLButtonElement;
    retry.addEventListener("click", () => {
      banner.remove();
      (this.byId("question") as HTMLTextAreaElement).value = question;
      void this.submitQuestion();
    });
    banner.append(retry);
    turns.append(banner);
  }

  private refreshSubmit(): void {
    const input = this.byId("question") as HTMLTextAreaElement;
    (this.byId("submit") as HTMLButtonElement).disabled = !canSubmit(
      input.value,
      this.pending,
    );
  }

  private setStatus(text: string, kind: "ok" | "busy" | "error"): void {
    const status = this.byId("status");
    status.textContent = text;
    status.className = `status status-${kind}`;
  }

  private byId(id: string): HTMLElement {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  }
}
