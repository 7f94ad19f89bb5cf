"""Frame-selection strategies behind one interface.

Every policy sees the observed per-frame quality, the recommendation
history, the current round, and the frame count, and returns a frame
index. Ties in argmin/argmax always break toward the lowest index.
"""

from __future__ import annotations

import math

import numpy as np

from .episode import AgentState
from .errors import ConfigError
from .qnet import QNetworkParams, forward
from .simenv import ObservationMode


class Policy:
    """Base selector. `preferred_mode` pins the observation channel a
    policy insists on (Worst variants); None follows the harness mode."""

    name: str = "policy"
    preferred_mode: ObservationMode | None = None

    def select(
        self,
        observation: np.ndarray,
        history: np.ndarray,
        round: int,
        n_frames: int,
    ) -> int:
        raise NotImplementedError


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(np.random.SeedSequence((seed, 8)))

    def select(self, observation, history, round, n_frames):
        return int(self._rng.integers(n_frames))

    def reseeded(self, seed: int) -> "RandomPolicy":
        return RandomPolicy(seed)


class LinspacePolicy(Policy):
    """Fixed-step sweep: pick round_half_up((t+1) * N / (T+1)), clamped."""

    name = "linspace"

    def __init__(self, horizon: int):
        self.horizon = horizon

    def select(self, observation, history, round, n_frames):
        raw = (round + 1) * n_frames / (self.horizon + 1)
        idx = int(math.floor(raw + 0.5))
        return min(max(idx, 0), n_frames - 1)


class WorstPolicy(Policy):
    """Annotate the frame with the lowest observed quality — the prior
    interactive-VOS paradigm used as the strongest baseline."""

    def __init__(self, mode: ObservationMode):
        self.preferred_mode = mode
        self.name = "worst-oracle" if mode is ObservationMode.ORACLE else "worst-wild"

    def select(self, observation, history, round, n_frames):
        return int(np.argmin(observation))


class AgentPolicy(Policy):
    """Greedy selection by the learned Q-network."""

    name = "agent"

    def __init__(self, params: QNetworkParams):
        if params is None:
            raise ConfigError("agent policy requires network parameters")
        self.params = params

    def select(self, observation, history, round, n_frames):
        state = AgentState(
            quality=np.clip(np.asarray(observation, dtype=np.float64), 0.0, 1.0),
            history=np.asarray(history, dtype=np.int64),
            round=round,
        )
        return int(np.argmax(forward(self.params, state)))


class ScriptedPolicy(Policy):
    """Replays a fixed action sequence; backs human-session replays."""

    name = "scripted"

    def __init__(self, actions, name: str = "scripted"):
        self.actions = [int(a) for a in actions]
        self.name = name

    def select(self, observation, history, round, n_frames):
        if round >= len(self.actions):
            raise ConfigError(f"scripted policy has no action for round {round}")
        return self.actions[round]
