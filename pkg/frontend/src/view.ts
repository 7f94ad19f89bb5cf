/**
 * DOM rendering for the session console: quality strip, history badges,
 * round indicator, score sparkline, summary table, and the error banner.
 * Renders only fields the API returned; in Wild mode the service sends no
 * true-quality values, so none can appear here.
 */

import type { SessionState, Summary } from "./api.js";
import { formatAuc, formatQuality, summaryRows } from "./format.js";

export interface StripHandlers {
  onPick(frame: number): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderRoundIndicator(
  container: HTMLElement,
  round: number,
  horizon: number,
): void {
  container.textContent = `round ${Math.min(round + 1, horizon)} / ${horizon}`;
}

/** One clickable bar per frame, height set by observed quality, with a
 * recommendation-count badge underneath. */
export function renderStrip(
  container: HTMLElement,
  state: SessionState,
  disabled: boolean,
  handlers: StripHandlers,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  state.quality.forEach((value, frame) => {
    const cell = el(doc, "div", "strip-cell");
    const button = el(doc, "button", "strip-bar");
    button.dataset.frame = String(frame);
    button.disabled = disabled;
    button.title = `frame ${frame + 1}: quality ${formatQuality(value)}`;
    const fill = el(doc, "div", "strip-fill");
    fill.style.height = `${Math.round(value * 100)}%`;
    button.appendChild(fill);
    button.addEventListener("click", () => {
      if (!button.disabled) {
        handlers.onPick(frame);
      }
    });
    cell.appendChild(button);
    const count = state.history[frame] ?? 0;
    const badge = el(doc, "div", count > 0 ? "badge badge-hit" : "badge", String(count));
    cell.appendChild(badge);
    container.appendChild(cell);
  });
}

/** Polyline sparkline of per-round scores; empty input clears the box. */
export function renderSparkline(
  container: HTMLElement,
  series: { label: string; values: number[] }[],
  horizon: number,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const withData = series.filter((s) => s.values.length > 0);
  if (withData.length === 0) {
    container.appendChild(el(doc, "span", "spark-empty", "scores revealed at the end"));
    return;
  }
  const width = 260;
  const height = 60;
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "sparkline");
  const colors = ["#2563eb", "#dc2626", "#059669"];
  withData.forEach((s, i) => {
    const points = s.values
      .map((v, k) => {
        const x = horizon > 1 ? (k / (horizon - 1)) * (width - 8) + 4 : width / 2;
        const y = height - 6 - v * (height - 12);
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(" ");
    const line = doc.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", points);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", colors[i % colors.length]);
    line.setAttribute("stroke-width", "1.5");
    line.setAttribute("data-label", s.label);
    svg.appendChild(line);
  });
  container.appendChild(svg);
}

/** Final comparison: Human / Agent / Worst / Random-mean rows with AUC and
 * mean choice latency, plus the human-vs-agent per-round overlay. */
export function renderSummary(container: HTMLElement, summary: Summary, horizon: number): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(el(doc, "h2", "summary-title", "Session summary"));

  const table = el(doc, "table", "summary-table");
  const head = el(doc, "tr");
  for (const column of ["Annotator", "AUC", "Mean choice time"]) {
    head.appendChild(el(doc, "th", undefined, column));
  }
  table.appendChild(head);
  for (const row of summaryRows(summary)) {
    const tr = el(doc, "tr");
    tr.appendChild(el(doc, "td", undefined, row.label));
    tr.appendChild(el(doc, "td", "num", row.auc));
    tr.appendChild(el(doc, "td", "num", row.latency));
    table.appendChild(tr);
  }
  container.appendChild(table);

  if (summary.baselines.agent_auc === undefined) {
    container.appendChild(
      el(doc, "p", "summary-note", "No agent checkpoint is loaded; agent row omitted."),
    );
  }

  const overlay = el(doc, "div", "summary-overlay");
  container.appendChild(overlay);
  const series = [{ label: "human", values: summary.per_round_scores }];
  renderSparkline(overlay, series, horizon);
  container.appendChild(
    el(doc, "p", "summary-note", `human AUC ${formatAuc(summary.human_auc)}`),
  );
}

export function renderBanner(
  container: HTMLElement,
  message: string | null,
  onRetry: (() => void) | null,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  if (message === null) {
    container.classList.remove("banner-visible");
    return;
  }
  container.classList.add("banner-visible");
  container.appendChild(el(doc, "span", "banner-text", message));
  if (onRetry) {
    const button = el(doc, "button", "banner-retry", "retry");
    button.addEventListener("click", onRetry);
    container.appendChild(button);
  }
}
