/**
 * Session controller: owns the lifecycle (idle -> playing -> done), the
 * in-flight request guard, and re-rendering after each confirmed server
 * response. Optimistic updates are deliberately absent: the view always
 * shows the last state the server returned.
 */

import { ApiClient, ApiError, SessionState, Summary } from "./api.js";
import {
  renderBanner,
  renderRoundIndicator,
  renderSparkline,
  renderStrip,
  renderSummary,
} from "./view.js";

export interface AppElements {
  strip: HTMLElement;
  round: HTMLElement;
  spark: HTMLElement;
  summary: HTMLElement;
  banner: HTMLElement;
}

export class SessionApp {
  private sessionId: string | null = null;
  private state: SessionState | null = null;
  private horizon = 0;
  private mode = "wild";
  private scores: number[] = [];
  private done = false;
  private inFlight = false;

  constructor(
    private readonly api: ApiClient,
    private readonly ui: AppElements,
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  get finished(): boolean {
    return this.done;
  }

  get currentRound(): number {
    return this.state?.round ?? 0;
  }

  async start(episodeIndex: number, mode: string, nonce?: number): Promise<void> {
    this.renderError(null);
    try {
      const info = await this.api.createSession(episodeIndex, mode, nonce);
      this.sessionId = info.session_id;
      this.state = info.state;
      this.horizon = info.horizon;
      this.mode = info.mode;
      this.scores = [];
      this.done = false;
      this.ui.summary.replaceChildren();
      this.render();
    } catch (err) {
      this.renderError(err, () => void this.start(episodeIndex, mode, nonce));
    }
  }

  /** Send the clicked frame unless a request is already in flight. */
  async choose(frame: number): Promise<void> {
    if (this.inFlight || this.done || this.sessionId === null || this.state === null) {
      return;
    }
    this.inFlight = true;
    this.render();
    try {
      const result = await this.api.act(this.sessionId, frame, this.state.round);
      this.state = result.state;
      this.done = result.done;
      await this.refreshScores();
      if (this.done) {
        const summary = await this.api.summary(this.sessionId);
        this.scores = summary.per_round_scores;
        this.renderSummaryPanel(summary);
      }
      this.renderError(null);
    } catch (err) {
      this.renderError(err, null);
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  private async refreshScores(): Promise<void> {
    if (this.sessionId === null) {
      return;
    }
    const snapshot = await this.api.getSession(this.sessionId);
    // Oracle sessions stream ground-truth scores; Wild sessions get them
    // only from the final summary.
    this.scores = snapshot.scores ?? this.scores;
  }

  private render(): void {
    if (this.state === null) {
      return;
    }
    renderRoundIndicator(this.ui.round, this.state.round, this.horizon);
    renderStrip(this.ui.strip, this.state, this.inFlight || this.done, {
      onPick: (frame) => void this.choose(frame),
    });
    renderSparkline(this.ui.spark, [{ label: this.mode, values: this.scores }], this.horizon);
  }

  private renderSummaryPanel(summary: Summary): void {
    renderSummary(this.ui.summary, summary, this.horizon);
  }

  private renderError(err: unknown, onRetry: (() => void) | null = null): void {
    if (err === null) {
      renderBanner(this.ui.banner, null, null);
      return;
    }
    const message =
      err instanceof ApiError ? `${err.message} (HTTP ${err.status})` : String(err);
    renderBanner(this.ui.banner, message, onRetry);
  }
}
