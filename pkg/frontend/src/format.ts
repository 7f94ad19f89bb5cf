/** Small presentation helpers shared by view code and tests. */

/** AUC rendered to exactly 4 decimal places, matching the API value. */
export function formatAuc(value: number): string {
  return value.toFixed(4);
}

export function formatLatencyMs(ms: number): string {
  return ms >= 1000 ? `${(ms / 1000).toFixed(2)} s` : `${ms.toFixed(0)} ms`;
}

export function formatQuality(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

/** Rows of the final comparison table, in display order. */
export interface SummaryRow {
  label: string;
  auc: string;
  latency: string;
}

export function summaryRows(summary: {
  human_auc: number;
  mean_choice_latency_ms: number;
  baselines: { worst_auc: number; random_auc_mean: number; agent_auc?: number };
}): SummaryRow[] {
  const rows: SummaryRow[] = [
    {
      label: "Human",
      auc: formatAuc(summary.human_auc),
      latency: formatLatencyMs(summary.mean_choice_latency_ms),
    },
  ];
  if (summary.baselines.agent_auc !== undefined) {
    rows.push({ label: "Agent", auc: formatAuc(summary.baselines.agent_auc), latency: "—" });
  }
  rows.push({ label: "Worst", auc: formatAuc(summary.baselines.worst_auc), latency: "—" });
  rows.push({
    label: "Random (mean)",
    auc: formatAuc(summary.baselines.random_auc_mean),
    latency: "—",
  });
  return rows;
}
