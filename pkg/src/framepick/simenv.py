"""Surrogate interactive-refinement environment.

Stands in for a real video-object-segmentation backend as the MDP state
transition: annotating frame `a` lifts every frame's quality by

    dq_n = gain * v_a * rho**h_a * exp(-dist_seg(n, a) / lam) * (1 - q_n)

where dist_seg adds a penalty of N * beta per segment boundary crossed
between n and a. The multiplicative structure reproduces the phenomenon
the agent is meant to exploit: the lowest-quality frame is not the
highest-gain frame once its neighborhood is saturated or it sits in an
already-annotated segment.
"""

from __future__ import annotations

import enum

import numpy as np

from .episode import AgentState, EpisodeConfig, QualityVector
from .errors import CalibrationError, EpisodeStateError

INITIAL_QUALITY_BASE = 0.35
# Per-step dynamics jitter; fixed (not configurable) so random-policy
# variance never degenerates. The on/off switch lives on EpisodeConfig.
TRANSITION_NOISE_SIGMA = 0.005

_STEP_STREAM = 0
_OBS_STREAM = 1


class ObservationMode(enum.Enum):
    ORACLE = "oracle"
    WILD = "wild"


class SimEnv:
    """Single-owner mutable episode state. Not safe for concurrent
    mutation; distinct envs may run fully in parallel."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        self.n_frames = config.n_frames
        self.horizon = config.horizon
        self._difficulty = np.asarray(config.difficulty, dtype=np.float64)
        self._info_value = np.asarray(config.info_value, dtype=np.float64)
        self._idx = np.arange(self.n_frames)
        # Number of boundaries at or left of each frame; crossings(n, a)
        # is then |rank[n] - rank[a]|.
        bounds = np.asarray(config.segment_boundaries, dtype=np.int64)
        self._boundary_rank = np.searchsorted(bounds, self._idx, side="right")
        # Per-round noise rows drawn up front so that the noise seen at a
        # given round depends only on (seed, round), never on the actions
        # taken: identical dynamics jitter across policies, and repeated
        # observes within one round agree.
        self._step_noise = (
            self._stream_rng(_STEP_STREAM).normal(
                0.0, TRANSITION_NOISE_SIGMA, size=(self.horizon, self.n_frames)
            )
            if config.transition_noise
            else None
        )
        self._obs_noise_rng = self._stream_rng(_OBS_STREAM)
        self._obs_noise_rows: dict[int, np.ndarray] = {}
        self._obs_rows_drawn = 0
        self.true_quality: QualityVector | None = None
        self.history: np.ndarray | None = None
        self.round = -1

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> AgentState:
        """Annotate the highest-info-value frame and derive the initial
        per-frame quality profile from it."""
        a0 = int(np.argmax(self._info_value))
        kernel = self._kernel(a0)
        d = self._difficulty
        self.true_quality = (1.0 - d) * INITIAL_QUALITY_BASE + d * INITIAL_QUALITY_BASE * kernel
        self.history = np.zeros(self.n_frames, dtype=np.int64)
        self.history[a0] = 1
        self.round = 0
        self.initial_action = a0
        return self._state()

    def step(self, action: int) -> tuple[AgentState, bool]:
        """Refine masks after an annotation of `action`; returns the new
        state and whether the episode hit its horizon."""
        self._require_live()
        if self.round >= self.horizon:
            raise EpisodeStateError(
                f"episode finished after {self.horizon} rounds; cannot step again"
            )
        action = int(action)
        if not 0 <= action < self.n_frames:
            raise IndexError(f"action {action} out of range [0, {self.n_frames})")
        cfg = self.config
        gain = (
            cfg.env_gain
            * self._info_value[action]
            * cfg.novelty_decay ** int(self.history[action])
        )
        dq = gain * self._kernel(action) * (1.0 - self.true_quality)
        q = self.true_quality + dq
        if self._step_noise is not None:
            q = q + self._step_noise[self.round]
        self.true_quality = np.clip(q, 0.0, 1.0)
        self.history[action] += 1
        self.round += 1
        return self._state(), self.round == self.horizon

    def observe(self, mode: ObservationMode) -> QualityVector:
        """Per-frame quality as seen by the selector. Oracle is the truth;
        Wild adds the calibrated estimation noise. The noise substream is
        keyed by round, so repeated observes within one round agree."""
        self._require_live()
        if mode is ObservationMode.ORACLE:
            return self.true_quality.copy()
        sigma = self.config.obs_noise_sigma
        if sigma == 0.0:
            return self.true_quality.copy()
        noisy = self.true_quality + sigma * self._obs_noise_row(self.round)
        return np.clip(noisy, 0.0, 1.0)

    # -- internals ---------------------------------------------------------

    def _obs_noise_row(self, round_idx: int) -> np.ndarray:
        # rows are drawn in round order from a dedicated stream, so the
        # noise at round r is a pure function of (seed, r)
        while self._obs_rows_drawn <= round_idx:
            self._obs_noise_rows[self._obs_rows_drawn] = self._obs_noise_rng.standard_normal(
                self.n_frames
            )
            self._obs_rows_drawn += 1
        return self._obs_noise_rows[round_idx]

    def _kernel(self, action: int) -> np.ndarray:
        crossings = np.abs(self._boundary_rank - self._boundary_rank[action])
        dist = np.abs(self._idx - action) + (
            self.n_frames * self.config.cross_segment_attenuation * crossings
        )
        return np.exp(-dist / self.config.propagation_scale)

    def _stream_rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.config.seed, stream)))

    def _require_live(self):
        if self.round < 0:
            raise EpisodeStateError("environment must be reset before use")

    def _state(self) -> AgentState:
        q = self.true_quality.copy()
        h = self.history.copy()
        q.setflags(write=False)
        h.setflags(write=False)
        return AgentState(quality=q, history=h, round=self.round)


def quality_population(config: EpisodeConfig, n_samples: int, seed: int) -> np.ndarray:
    """Pool true per-frame qualities from seeded random rollouts of the
    given episode until at least `n_samples` values are collected.

    This is the reference population against which Wild observation noise
    is calibrated: it spans the quality levels a selector actually sees,
    from the initial profile through `horizon` refinements.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    chunks = []
    total = 0
    while total < n_samples:
        env = SimEnv(config)
        env.reset()
        chunks.append(env.true_quality.copy())
        total += env.n_frames
        for _ in range(config.horizon):
            env.step(int(rng.integers(env.n_frames)))
            chunks.append(env.true_quality.copy())
            total += env.n_frames
    return np.concatenate(chunks)[:n_samples]


def calibrate_noise(
    target_pcc: float,
    config: EpisodeConfig,
    n_samples: int = 100_000,
    tol: float = 0.02,
    seed: int = 0,
) -> float:
    """Find sigma such that Pearson correlation between clip(q + N(0, sigma^2))
    and q over a simulated quality population hits `target_pcc` within `tol`.

    Bisection works because the empirical PCC is monotone decreasing in
    sigma for a fixed standard-normal draw.
    """
    if not 0.0 < target_pcc < 1.0:
        raise CalibrationError(f"target PCC must lie in (0, 1), got {target_pcc}")
    q = quality_population(config, n_samples, seed=seed)
    if np.std(q) == 0.0:
        raise CalibrationError("quality population is constant; PCC undefined")
    eps = np.random.default_rng(np.random.SeedSequence((seed, 3))).standard_normal(q.size)

    def pcc(sigma: float) -> float:
        noisy = np.clip(q + sigma * eps, 0.0, 1.0)
        if np.std(noisy) == 0.0:
            return 0.0
        return float(np.corrcoef(q, noisy)[0, 1])

    lo, hi = 0.0, 0.05
    while pcc(hi) > target_pcc:
        hi *= 2.0
        if hi > 128.0:
            raise CalibrationError(
                f"target PCC {target_pcc} unattainable even at sigma={hi}"
            )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        value = pcc(mid)
        if abs(value - target_pcc) <= 0.25 * tol:
            return mid
        if value > target_pcc:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    if abs(pcc(mid) - target_pcc) > tol:
        raise CalibrationError(
            f"bisection stalled: PCC {pcc(mid):.4f} vs target {target_pcc}"
        )
    return mid
