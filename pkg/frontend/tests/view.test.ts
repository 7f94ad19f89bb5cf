import { describe, expect, it, vi } from "vitest";

import type { Summary } from "../src/api.js";
import { formatAuc, summaryRows } from "../src/format.js";
import { renderSparkline, renderStrip, renderSummary } from "../src/view.js";

function box(): HTMLElement {
  const node = document.createElement("div");
  document.body.appendChild(node);
  return node;
}

const state = {
  quality: [0.25, 0.8, 0.5],
  history: [1, 0, 2],
  round: 3,
};

describe("renderStrip", () => {
  it("renders one bar per frame with history badges", () => {
    const root = box();
    renderStrip(root, state, false, { onPick: () => {} });
    const bars = root.querySelectorAll("button.strip-bar");
    expect(bars).toHaveLength(3);
    const badges = [...root.querySelectorAll(".badge")].map((b) => b.textContent);
    expect(badges).toEqual(["1", "0", "2"]);
    expect(badges.map(Number).reduce((a, b) => a + b, 0)).toBe(state.round);
  });

  it("clicking bar k reports frame k", () => {
    const root = box();
    const onPick = vi.fn();
    renderStrip(root, state, false, { onPick });
    (root.querySelectorAll("button.strip-bar")[1] as HTMLButtonElement).click();
    expect(onPick).toHaveBeenCalledWith(1);
  });

  it("disabled strip ignores clicks", () => {
    const root = box();
    const onPick = vi.fn();
    renderStrip(root, state, true, { onPick });
    (root.querySelectorAll("button.strip-bar")[0] as HTMLButtonElement).click();
    expect(onPick).not.toHaveBeenCalled();
  });
});

describe("renderSparkline", () => {
  it("shows placeholder when no scores yet", () => {
    const root = box();
    renderSparkline(root, [{ label: "wild", values: [] }], 8);
    expect(root.textContent).toContain("revealed at the end");
  });

  it("draws one polyline per series", () => {
    const root = box();
    renderSparkline(
      root,
      [
        { label: "human", values: [0.3, 0.5, 0.6] },
        { label: "agent", values: [0.4, 0.5, 0.7] },
      ],
      3,
    );
    expect(root.querySelectorAll("polyline")).toHaveLength(2);
  });
});

const summaryWithAgent: Summary = {
  session_id: "s",
  human_auc: 0.73091234,
  per_round_scores: [0.7, 0.73, 0.76],
  actions: [1, 2, 0],
  mean_choice_latency_ms: 14010,
  baselines: { worst_auc: 0.7333, random_auc_mean: 0.7299, agent_auc: 0.74105 },
};

describe("renderSummary", () => {
  it("renders four rows when the agent baseline exists", () => {
    const root = box();
    renderSummary(root, summaryWithAgent, 3);
    const rows = root.querySelectorAll("table tr");
    expect(rows).toHaveLength(5); // header + 4 annotators
    expect(root.textContent).not.toContain("omitted");
  });

  it("omits the agent row with a note when absent", () => {
    const root = box();
    const summary = {
      ...summaryWithAgent,
      baselines: { worst_auc: 0.7333, random_auc_mean: 0.7299 },
    };
    renderSummary(root, summary, 3);
    expect(root.querySelectorAll("table tr")).toHaveLength(4);
    expect(root.textContent).toContain("omitted");
  });

  it("shows human AUC to exactly 4 decimal places", () => {
    const root = box();
    renderSummary(root, summaryWithAgent, 3);
    expect(root.textContent).toContain("0.7309");
    expect(formatAuc(summaryWithAgent.human_auc)).toBe("0.7309");
  });
});

describe("summaryRows", () => {
  it("orders rows Human/Agent/Worst/Random", () => {
    expect(summaryRows(summaryWithAgent).map((r) => r.label)).toEqual([
      "Human",
      "Agent",
      "Worst",
      "Random (mean)",
    ]);
  });
});
