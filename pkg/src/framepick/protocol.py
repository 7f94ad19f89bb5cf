"""Newline-delimited JSON protocol bridging the trainer/harness to an
external environment process (e.g. a real VOS backend).

Requests:  {"cmd":"reset","config":{...}}
           {"cmd":"step","action":k}
           {"cmd":"observe","mode":"oracle"|"wild"}
           {"cmd":"close"}
Replies:   {"state":{"quality":[...],"history":[...],"round":t}}
           {"state":{...},"done":b}
           {"quality":[...]}
           {"ok":true}
           {"error":"..."}   for any failed command

All lines are UTF-8. The reference counterparty is `framepick env-stdio`,
which serves the built-in simulator over stdin/stdout.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from typing import BinaryIO

import numpy as np

from .episode import AgentState, EpisodeConfig
from .errors import ProtocolError, RemoteEnvError, TransportError

DEFAULT_TIMEOUT = 60.0

_EOF = object()


class LineChannel:
    """Framed JSON messages over a byte stream pair with per-message
    receive timeout (a background thread owns the blocking reads)."""

    def __init__(self, reader: BinaryIO, writer: BinaryIO, timeout: float = DEFAULT_TIMEOUT):
        self._reader = reader
        self._writer = writer
        self.timeout = timeout
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def _pump(self):
        try:
            for line in self._reader:
                self._queue.put(line)
        except (OSError, ValueError):
            pass
        self._queue.put(_EOF)

    def send(self, message: dict) -> None:
        try:
            self._writer.write((json.dumps(message) + "\n").encode())
            self._writer.flush()
        except (OSError, ValueError) as exc:
            raise TransportError(f"failed to send message: {exc}") from exc

    def recv(self) -> dict:
        try:
            line = self._queue.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError(f"no reply within {self.timeout} s") from None
        if line is _EOF:
            raise TransportError("stream closed by remote end")
        text = line.decode("utf-8", errors="replace").strip()
        try:
            message = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed message: {text!r}") from exc
        if not isinstance(message, dict):
            raise ProtocolError(f"malformed message (not an object): {text!r}")
        return message


def _parse_state(payload, raw) -> AgentState:
    try:
        quality = np.asarray(payload["quality"], dtype=np.float64)
        history = np.asarray(payload["history"], dtype=np.int64)
        round_idx = int(payload["round"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed state payload: {raw!r}") from exc
    quality.setflags(write=False)
    history.setflags(write=False)
    return AgentState(quality=quality, history=history, round=round_idx)


class ExternalEnv:
    """Environment handle speaking the wire protocol; mirrors SimEnv's
    reset/step/observe surface so harness code cannot tell them apart."""

    def __init__(self, channel: LineChannel, config: EpisodeConfig):
        self._channel = channel
        self.config = config
        self.n_frames = config.n_frames
        self.horizon = config.horizon
        self.round = -1

    def _roundtrip(self, request: dict) -> dict:
        self._channel.send(request)
        reply = self._channel.recv()
        if "error" in reply:
            raise RemoteEnvError(str(reply["error"]))
        return reply

    def reset(self) -> AgentState:
        reply = self._roundtrip({"cmd": "reset", "config": self.config.to_dict()})
        if "state" not in reply:
            raise ProtocolError(f"reset reply missing state: {reply!r}")
        state = _parse_state(reply["state"], reply)
        self.round = state.round
        return state

    def step(self, action: int) -> tuple[AgentState, bool]:
        reply = self._roundtrip({"cmd": "step", "action": int(action)})
        if "state" not in reply or "done" not in reply:
            raise ProtocolError(f"step reply missing state/done: {reply!r}")
        state = _parse_state(reply["state"], reply)
        self.round = state.round
        return state, bool(reply["done"])

    def observe(self, mode) -> np.ndarray:
        mode_name = getattr(mode, "value", str(mode))
        reply = self._roundtrip({"cmd": "observe", "mode": mode_name})
        if "quality" not in reply:
            raise ProtocolError(f"observe reply missing quality: {reply!r}")
        return np.asarray(reply["quality"], dtype=np.float64)

    @property
    def true_quality(self) -> np.ndarray:
        from .simenv import ObservationMode

        return self.observe(ObservationMode.ORACLE)

    def close(self) -> None:
        try:
            self._channel.send({"cmd": "close"})
        except TransportError:
            pass


def external_env(
    reader: BinaryIO,
    writer: BinaryIO,
    config: EpisodeConfig,
    timeout: float = DEFAULT_TIMEOUT,
) -> ExternalEnv:
    """Wrap an already-open byte-stream pair as an environment."""
    return ExternalEnv(LineChannel(reader, writer, timeout), config)


class SpawnedEnv(ExternalEnv):
    """External env backed by a child process's stdin/stdout."""

    def __init__(self, argv: list[str], config: EpisodeConfig, timeout: float = DEFAULT_TIMEOUT):
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        super().__init__(LineChannel(self._proc.stdout, self._proc.stdin, timeout), config)

    def close(self) -> None:
        super().close()
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()


def serve_env(rfile: BinaryIO, wfile: BinaryIO, make_env=None) -> None:
    """Serve environments over a byte-stream pair until EOF or a close
    command. `make_env` maps an EpisodeConfig to an environment; the
    default is the built-in simulator."""
    from .simenv import ObservationMode, SimEnv

    if make_env is None:
        make_env = SimEnv
    env = None

    def reply(obj: dict):
        wfile.write((json.dumps(obj) + "\n").encode())
        wfile.flush()

    for line in rfile:
        text = line.decode("utf-8", errors="replace").strip()
        if not text:
            continue
        try:
            message = json.loads(text)
            if not isinstance(message, dict) or "cmd" not in message:
                raise ValueError("not a command object")
        except ValueError:
            reply({"error": f"malformed message: {text!r}"})
            continue
        cmd = message["cmd"]
        try:
            if cmd == "reset":
                env = make_env(EpisodeConfig.from_dict(message["config"]))
                state = env.reset()
                reply({"state": _state_payload(state)})
            elif cmd == "step":
                _require(env, "step before reset")
                state, done = env.step(int(message["action"]))
                reply({"state": _state_payload(state), "done": done})
            elif cmd == "observe":
                _require(env, "observe before reset")
                mode = ObservationMode(message.get("mode", "oracle"))
                reply({"quality": env.observe(mode).tolist()})
            elif cmd == "close":
                reply({"ok": True})
                return
            else:
                reply({"error": f"unknown command {cmd!r}"})
        except Exception as exc:  # surfaced to the peer, never crashes the loop
            reply({"error": f"{type(exc).__name__}: {exc}"})


def _require(env, message: str):
    if env is None:
        raise RuntimeError(message)


def _state_payload(state: AgentState) -> dict:
    return {
        "quality": state.quality.tolist(),
        "history": state.history.tolist(),
        "round": state.round,
    }
