/**
 * Typed client for the framepick session API.
 *
 * Every state change round-trips through the service; the client never
 * simulates dynamics. Actions carry the round they were decided on, so a
 * stale double-submission is rejected by the server with a 409.
 */

export interface SessionState {
  quality: number[];
  history: number[];
  round: number;
}

export interface SessionInfo {
  session_id: string;
  episode_index: number;
  mode: string;
  n_frames: number;
  horizon: number;
  state: SessionState;
}

export interface SessionSnapshot extends SessionInfo {
  round: number;
  done: boolean;
  scores?: number[];
}

export interface ActionResult {
  session_id: string;
  round: number;
  done: boolean;
  state: SessionState;
}

export interface SummaryBaselines {
  worst_auc: number;
  random_auc_mean: number;
  agent_auc?: number;
}

export interface Summary {
  session_id: string;
  human_auc: number;
  per_round_scores: number[];
  actions: number[];
  mean_choice_latency_ms: number;
  baselines: SummaryBaselines;
}

export interface Meta {
  tool_version: string;
  suite_hash: string;
  n_episodes: number;
  horizons: number[];
  has_agent: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    let body: unknown = null;
    const text = await response.text();
    if (text.length > 0) {
      try {
        body = JSON.parse(text);
      } catch {
        body = null;
      }
    }
    if (!response.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  meta(): Promise<Meta> {
    return this.request<Meta>("/meta");
  }

  createSession(episodeIndex: number, mode: string, nonce?: number): Promise<SessionInfo> {
    const payload: Record<string, unknown> = { episode_index: episodeIndex, mode };
    if (nonce !== undefined) {
      payload.nonce = nonce;
    }
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request<SessionSnapshot>(`/sessions/${sessionId}`);
  }

  /** Submit the frame chosen for `round`; the server rejects stale rounds. */
  act(sessionId: string, frame: number, round: number): Promise<ActionResult> {
    return this.request<ActionResult>(`/sessions/${sessionId}/actions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ frame, round }),
    });
  }

  summary(sessionId: string): Promise<Summary> {
    return this.request<Summary>(`/sessions/${sessionId}/summary`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request<void>(`/sessions/${sessionId}`, { method: "DELETE" });
  }
}
