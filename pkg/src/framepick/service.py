"""HTTP session service powering human-play mode.

A session wraps one seeded episode. The human sees the mode-appropriate
observation (never true quality in Wild mode), picks a frame per round,
and on completion gets a summary comparing their AUC and choice latency
against agent/worst/random baselines replayed on the same seeded episode.

Concurrency: sessions are independent; mutations to one session are
serialized by a non-blocking lock (reject with 409, never queue), and an
optional `round` field in the action body lets clients detect stale
double-submissions deterministically.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .episode import EpisodeConfig, RoundRecord, mean_quality
from .evaluate import run_episode
from .policies import AgentPolicy, RandomPolicy, WorstPolicy
from .qnet import QNetworkParams
from .rewards import aux_reward
from .simenv import ObservationMode, SimEnv
from .util import derive_seed


@dataclass
class Session:
    id: str
    episode_index: int
    mode: ObservationMode
    env: SimEnv
    horizon: int
    nonce: int
    created_at: float
    records: list[RoundRecord] = field(default_factory=list)
    latencies_ms: list[float] = field(default_factory=list)
    state_served_at: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def actions(self) -> list[int]:
        return [r.action for r in self.records]

    @property
    def scores(self) -> list[float]:
        return [r.mean_quality_after for r in self.records]

    @property
    def done(self) -> bool:
        return len(self.records) >= self.horizon


def _json_error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    suite: list[EpisodeConfig],
    suite_hash: str,
    agent_params: QNetworkParams | None = None,
    session_log: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="framepick human-play service", version=__version__)
    sessions: dict[str, Session] = {}
    store_lock = threading.Lock()
    log_path = Path(session_log) if session_log else None

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return _json_error(400, "malformed request body")

    def session_config(episode_index: int, nonce: int) -> EpisodeConfig:
        base = suite[episode_index]
        seed = derive_seed(int(suite_hash, 16), 14, episode_index, nonce)
        return replace(base, seed=seed)

    def state_payload(session: Session) -> dict:
        observed = session.env.observe(session.mode)
        session.state_served_at = time.monotonic()
        return {
            "quality": [float(v) for v in observed],
            "history": [int(v) for v in session.env.history],
            "round": session.env.round,
        }

    def append_session_log(session: Session):
        if log_path is None:
            return
        record = {
            "session_id": session.id,
            "episode_index": session.episode_index,
            "mode": session.mode.value,
            "nonce": session.nonce,
            "actions": session.actions,
            "scores": session.scores,
            "auc": float(sum(session.scores) / len(session.scores)),
            "latencies_ms": session.latencies_ms,
            "created_at": session.created_at,
            "completed_at": time.time(),
        }
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(log_path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    @app.get("/meta")
    def meta():
        return {
            "tool_version": __version__,
            "suite_hash": suite_hash,
            "n_episodes": len(suite),
            "horizons": [c.horizon for c in suite],
            "has_agent": agent_params is not None,
        }

    @app.post("/sessions")
    def create_session(body: dict):
        if not isinstance(body, dict) or "episode_index" not in body or "mode" not in body:
            return _json_error(400, "body must provide episode_index and mode")
        try:
            episode_index = int(body["episode_index"])
            mode = ObservationMode(str(body["mode"]).lower())
            nonce = int(body.get("nonce", secrets.randbits(32)))
        except (TypeError, ValueError):
            return _json_error(400, "invalid episode_index, mode, or nonce")
        if not 0 <= episode_index < len(suite):
            return _json_error(422, f"episode_index must lie in [0, {len(suite)})")
        config = session_config(episode_index, nonce)
        env = SimEnv(config)
        env.reset()
        session = Session(
            id=secrets.token_hex(8),
            episode_index=episode_index,
            mode=mode,
            env=env,
            horizon=config.horizon,
            nonce=nonce,
            created_at=time.time(),
        )
        with store_lock:
            sessions[session.id] = session
        return {
            "session_id": session.id,
            "episode_index": episode_index,
            "mode": mode.value,
            "n_frames": env.n_frames,
            "horizon": session.horizon,
            "state": state_payload(session),
        }

    def find(session_id: str) -> Session | None:
        with store_lock:
            return sessions.get(session_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = find(session_id)
        if session is None:
            return _json_error(404, "unknown session")
        payload = {
            "session_id": session.id,
            "episode_index": session.episode_index,
            "mode": session.mode.value,
            "n_frames": session.env.n_frames,
            "horizon": session.horizon,
            "round": session.env.round,
            "done": session.done,
            "state": state_payload(session),
        }
        if session.mode is ObservationMode.ORACLE:
            # Running ground-truth scores stay hidden in Wild mode until the
            # summary; revealing them would leak true quality mid-session.
            payload["scores"] = session.scores
        return payload

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, body: dict):
        session = find(session_id)
        if session is None:
            return _json_error(404, "unknown session")
        if not isinstance(body, dict) or "frame" not in body:
            return _json_error(400, "body must provide a frame index")
        try:
            frame = int(body["frame"])
            claimed_round = int(body["round"]) if "round" in body else None
        except (TypeError, ValueError):
            return _json_error(400, "frame and round must be integers")
        if not session.lock.acquire(blocking=False):
            return _json_error(409, "another action on this session is in flight")
        try:
            if session.done:
                return _json_error(409, "session already completed")
            if claimed_round is not None and claimed_round != session.env.round:
                return _json_error(
                    409,
                    f"stale action for round {claimed_round}; session is at round {session.env.round}",
                )
            if not 0 <= frame < session.env.n_frames:
                return _json_error(
                    422, f"frame must lie in [0, {session.env.n_frames})"
                )
            now = time.monotonic()
            latency = (now - session.state_served_at) * 1000.0
            round_index = session.env.round
            before = mean_quality(session.env.true_quality)
            aux = aux_reward(session.env.history, frame)
            _, done = session.env.step(frame)
            session.records.append(
                RoundRecord(
                    round=round_index,
                    action=frame,
                    mean_quality_before=before,
                    mean_quality_after=mean_quality(session.env.true_quality),
                    aux_reward=aux,
                )
            )
            session.latencies_ms.append(latency)
            if done:
                append_session_log(session)
            return {
                "session_id": session.id,
                "round": session.env.round,
                "done": done,
                "state": state_payload(session),
            }
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/summary")
    def summary(session_id: str):
        session = find(session_id)
        if session is None:
            return _json_error(404, "unknown session")
        if not session.done:
            return _json_error(409, "session is not complete")
        config = session_config(session.episode_index, session.nonce)
        worst = run_episode(
            SimEnv(config), WorstPolicy(session.mode), session.horizon, session.mode
        )
        random_aucs = [
            run_episode(
                SimEnv(config),
                RandomPolicy(derive_seed(config.seed, 15, rep)),
                session.horizon,
                session.mode,
            ).auc
            for rep in range(5)
        ]
        baselines = {
            "worst_auc": worst.auc,
            "random_auc_mean": float(sum(random_aucs) / len(random_aucs)),
        }
        if agent_params is not None:
            agent = run_episode(
                SimEnv(config), AgentPolicy(agent_params), session.horizon, session.mode
            )
            baselines["agent_auc"] = agent.auc
        return {
            "session_id": session.id,
            "human_auc": float(sum(session.scores) / len(session.scores)),
            "per_round_scores": session.scores,
            "actions": session.actions,
            "mean_choice_latency_ms": float(
                sum(session.latencies_ms) / len(session.latencies_ms)
            ),
            "baselines": baselines,
        }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with store_lock:
            session = sessions.pop(session_id, None)
        if session is None:
            return _json_error(404, "unknown session")
        return Response(status_code=204)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
