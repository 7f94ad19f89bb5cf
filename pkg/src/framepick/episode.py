"""Core domain types shared by the simulator, trainer, policies, and harness.

Frame indices are zero-based everywhere internally; one-based numbering
appears only in rendered reports. Quality vectors hold per-frame scores in
[0, 1]; history vectors hold per-frame recommendation counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConsistencyError, DimensionError, DomainError
from .util import MAX_SEED

# Conceptual aliases; both are 1-D numpy arrays of length N.
QualityVector = np.ndarray
HistoryVector = np.ndarray
FrameIndex = int


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


def as_quality(values: Sequence[float]) -> QualityVector:
    """Validate and freeze a per-frame quality vector."""
    q = np.asarray(values, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise DimensionError(f"quality vector must be 1-D and non-empty, got shape {q.shape}")
    if not np.isfinite(q).all():
        raise DomainError("quality vector contains non-finite entries")
    if (q < 0).any() or (q > 1).any():
        raise DomainError("quality entries must lie in [0, 1]")
    return _readonly(q.copy())


def as_history(counts: Sequence[int]) -> HistoryVector:
    """Validate and freeze a per-frame recommendation-count vector."""
    h = np.asarray(counts)
    if h.ndim != 1 or h.size == 0:
        raise DimensionError(f"history vector must be 1-D and non-empty, got shape {h.shape}")
    if not np.issubdtype(h.dtype, np.integer):
        hf = np.asarray(counts, dtype=np.float64)
        if not np.array_equal(hf, np.round(hf)):
            raise DomainError("history counts must be integers")
        h = hf.astype(np.int64)
    if (h < 0).any():
        raise DomainError("history counts must be non-negative")
    return _readonly(h.astype(np.int64, copy=True))


@dataclass(frozen=True)
class AgentState:
    """Observation the agent acts on: per-frame quality, recommendation
    history, and the round counter (number of interactions performed).

    The simulator credits the initial human-annotated frame in `history`,
    so env-produced states carry sum(history) == round + 1; states built
    through :func:`make_state` satisfy the stricter sum == round contract.
    """

    quality: QualityVector
    history: HistoryVector
    round: int

    def __post_init__(self):
        if self.quality.shape != self.history.shape:
            raise DimensionError(
                f"quality length {self.quality.size} != history length {self.history.size}"
            )
        if self.round < 0:
            raise DomainError(f"round must be non-negative, got {self.round}")

    @property
    def n_frames(self) -> int:
        return int(self.quality.size)

    def flatten(self) -> np.ndarray:
        """Concatenated form [q_1..q_N, h_1..h_N], length 2N."""
        return np.concatenate([self.quality, self.history.astype(np.float64)])


def make_state(quality, history, round: int) -> AgentState:
    """Build an AgentState, enforcing that history sums to the round count
    (one recommendation per round)."""
    q = as_quality(quality)
    h = as_history(history)
    if q.size != h.size:
        raise DimensionError(f"quality length {q.size} != history length {h.size}")
    if int(h.sum()) != round:
        raise ConsistencyError(
            f"history sums to {int(h.sum())} but round is {round}"
        )
    return AgentState(quality=q, history=h, round=round)


def aggregate_object_quality(per_object: Sequence[float]) -> float:
    """Per-frame quality as the mean of per-object qualities."""
    vals = np.asarray(per_object, dtype=np.float64)
    if vals.size == 0:
        raise DomainError("cannot aggregate an empty set of object qualities")
    if (vals < 0).any() or (vals > 1).any() or not np.isfinite(vals).all():
        raise DomainError("object qualities must lie in [0, 1]")
    return float(vals.mean())


def mean_quality(q: Sequence[float]) -> float:
    """Mean per-frame quality; the per-round performance proxy P."""
    vals = np.asarray(q, dtype=np.float64)
    if vals.size == 0:
        raise DomainError("mean_quality of an empty vector is undefined")
    return float(vals.mean())


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to reconstruct one surrogate episode.

    `difficulty` shapes the initial quality profile, `info_value` scales
    how much annotating each frame helps, `propagation_scale` is the
    spatial reach (in frames) of one annotation, and `segment_boundaries`
    mark shot changes across which propagation is attenuated.
    """

    n_frames: int
    horizon: int
    n_objects: int = 1
    segment_boundaries: tuple[int, ...] = ()
    difficulty: tuple[float, ...] = ()
    info_value: tuple[float, ...] = ()
    propagation_scale: float = 10.0
    env_gain: float = 0.35
    novelty_decay: float = 0.7
    cross_segment_attenuation: float = 0.8
    obs_noise_sigma: float = 0.0
    seed: int = 0
    transition_noise: bool = True

    def __post_init__(self):
        problems = []
        if self.n_frames < 2:
            problems.append(f"n_frames must be >= 2, got {self.n_frames}")
        if self.horizon < 1:
            problems.append(f"horizon must be >= 1, got {self.horizon}")
        if self.n_objects < 1:
            problems.append(f"n_objects must be >= 1, got {self.n_objects}")
        bounds = tuple(self.segment_boundaries)
        if any(not (0 <= b < self.n_frames) for b in bounds):
            problems.append(f"segment boundaries must lie in [0, n_frames), got {bounds}")
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            problems.append(f"segment boundaries must be strictly increasing, got {bounds}")
        d = tuple(float(x) for x in self.difficulty)
        v = tuple(float(x) for x in self.info_value)
        if len(d) != self.n_frames:
            problems.append(f"difficulty must have length {self.n_frames}, got {len(d)}")
        elif any(not (0.0 <= x <= 1.0) for x in d):
            problems.append("difficulty entries must lie in [0, 1]")
        if len(v) != self.n_frames:
            problems.append(f"info_value must have length {self.n_frames}, got {len(v)}")
        elif any(not (0.0 < x <= 1.0) for x in v):
            problems.append("info_value entries must lie in (0, 1]")
        if not self.propagation_scale > 0:
            problems.append(f"propagation_scale must be > 0, got {self.propagation_scale}")
        if not (0.0 < self.env_gain <= 1.0):
            problems.append(f"env_gain must be in (0, 1], got {self.env_gain}")
        if not (0.0 < self.novelty_decay <= 1.0):
            problems.append(f"novelty_decay must be in (0, 1], got {self.novelty_decay}")
        if not (0.0 <= self.cross_segment_attenuation <= 1.0):
            problems.append(
                f"cross_segment_attenuation must be in [0, 1], got {self.cross_segment_attenuation}"
            )
        if self.obs_noise_sigma < 0:
            problems.append(f"obs_noise_sigma must be >= 0, got {self.obs_noise_sigma}")
        if not (0 <= self.seed < MAX_SEED):
            problems.append(f"seed must be a non-negative 63-bit integer, got {self.seed}")
        if problems:
            raise ConfigError("; ".join(problems))
        object.__setattr__(self, "segment_boundaries", bounds)
        object.__setattr__(self, "difficulty", d)
        object.__setattr__(self, "info_value", v)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["segment_boundaries"] = list(d["segment_boundaries"])
        d["difficulty"] = list(d["difficulty"])
        d["info_value"] = list(d["info_value"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown episode config fields: {sorted(extra)}")
        kwargs = dict(d)
        for key in ("segment_boundaries", "difficulty", "info_value"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class RoundRecord:
    """One interaction round as recorded for reports and session logs."""

    round: int
    action: FrameIndex
    mean_quality_before: float
    mean_quality_after: float
    aux_reward: float
    goal_reward: float | None = None


@dataclass(frozen=True)
class EpisodeResult:
    """Outcome of a full episode: actions, per-round mean quality, AUC."""

    actions: tuple[FrameIndex, ...]
    scores: tuple[float, ...]
    auc: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if len(self.actions) != len(self.scores):
            raise DimensionError(
                f"{len(self.actions)} actions but {len(self.scores)} scores"
            )
        if len(self.scores) == 0:
            raise DomainError("an episode result needs at least one round")
        mean = float(np.mean(self.scores))
        if self.auc is None:
            object.__setattr__(self, "auc", mean)
        elif abs(self.auc - mean) > 1e-12:
            raise ConsistencyError(f"auc {self.auc} != mean(scores) {mean}")
