"""Double-DQN training loop with experience replay and task decomposition.

One optimizer update runs per environment step once the buffer is warm.
Targets follow double Q-learning: the policy network picks the next
action, the periodically synchronized target network values it. Training
is single-threaded and bit-reproducible by default; optional parallel
episode collection relaxes the determinism guarantee and records the
worker count in the log.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path
from typing import Callable

import numpy as np

from .episode import EpisodeConfig, mean_quality
from .errors import ConfigError, DimensionError, DomainError
from .evaluate import run_episode
from .policies import AgentPolicy
from .qnet import (
    DEFAULT_H_SCALE,
    QNetworkParams,
    adam_step,
    batch_loss_and_grad,
    forward,
    forward_many,
    init_adam,
    init_params,
)
from .rewards import (
    DISCOUNT_GAMMA,
    SCALING_DELTA,
    RandomStats,
    StatsCache,
    StepRecord,
    Transition,
    aux_reward,
    decompose,
    flat_transitions,
)
from .simenv import ObservationMode, SimEnv
from .util import derive_seed

REWARD_COMPONENTS = ("both", "goal", "aux")
WARM_FILL_FACTOR = 10  # buffer holds at least this many batches before updates start


@dataclass
class TrainConfig:
    lr: float = 5e-6
    batch_size: int = 32
    eps_start: float = 0.7
    eps_end: float = 0.25
    eps_steps: int = 5000
    target_sync_period: int = 200
    t_train: int = 5
    subseq_len: int = 25
    subseq_lens: tuple[int, ...] | None = None
    episodes: int = 500
    seed: int = 0
    buffer_capacity: int = 5760
    stats_runs: int = 30
    variant: str = "final"
    reward_components: str = "both"
    task_decomposition: bool = True
    use_quality: bool = True
    use_history: bool = True
    h_scale: float = DEFAULT_H_SCALE
    workers: int = 1
    checkpoint_every: int = 0
    checkpoint_path: str | None = None
    log_path: str | None = None

    def __post_init__(self):
        problems = []
        if not (0.0 < self.eps_end <= self.eps_start <= 1.0):
            problems.append(
                f"need 0 < eps_end <= eps_start <= 1, got {self.eps_end}, {self.eps_start}"
            )
        for name in ("batch_size", "eps_steps", "target_sync_period", "t_train",
                     "subseq_len", "episodes", "buffer_capacity", "workers"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0:
            problems.append(f"lr must be positive, got {self.lr}")
        if self.variant not in ("naive", "final"):
            problems.append(f"unknown reward variant {self.variant!r}")
        if self.reward_components not in REWARD_COMPONENTS:
            problems.append(f"unknown reward components {self.reward_components!r}")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def paper(cls, **overrides) -> "TrainConfig":
        """Hyperparameters as published (GPU-scale)."""
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """CPU-scale preset backing the acceptance suite.

        Training windows are sampled from several lengths because the
        small CPU-scale recurrent net does not generalize from one fixed
        training length to the full range of evaluation lengths.
        """
        merged = {"lr": 1e-4, "episodes": 2000, "subseq_lens": (25, 50, 100)}
        merged.update(overrides)
        return cls(**merged)


def epsilon(step: int, cfg: TrainConfig) -> float:
    """Exponential exploration decay, constant beyond eps_steps."""
    if step < 0:
        raise DomainError(f"step must be >= 0, got {step}")
    if step >= cfg.eps_steps:
        return cfg.eps_end
    if step == 0:
        return cfg.eps_start
    return cfg.eps_start * (cfg.eps_end / cfg.eps_start) ** (step / cfg.eps_steps)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int = 5760):
        if capacity < 1:
            raise ConfigError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._next] = tr
            self._next = (self._next + 1) % self.capacity

    def extend(self, transitions) -> None:
        for tr in transitions:
            self.push(tr)

    def __len__(self) -> int:
        return len(self._items)

    def items(self) -> list[Transition]:
        """Contents oldest-first."""
        return self._items[self._next :] + self._items[: self._next]

    def sample(self, rng: np.random.Generator, k: int) -> list[Transition]:
        if k > len(self._items):
            raise DomainError(f"cannot sample {k} from buffer of {len(self._items)}")
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[i] for i in idx]


def sync_target(policy_params: QNetworkParams) -> QNetworkParams:
    """Deep copy; later policy updates leave the target untouched."""
    return policy_params.copy()


def collect_episode(
    env: SimEnv,
    policy_params: QNetworkParams,
    eps: float,
    stats_by_horizon: dict[int, RandomStats],
    rng: np.random.Generator,
    variant: str = "final",
    task_decomposition: bool = True,
) -> list[Transition]:
    """Roll out one eps-greedy episode and decompose it into sub-task
    transitions. The horizon is the largest contiguous key in
    `stats_by_horizon`."""
    total = len(stats_by_horizon)
    if sorted(stats_by_horizon) != list(range(1, total + 1)):
        raise ConfigError(
            f"stats_by_horizon must cover 1..T contiguously, got {sorted(stats_by_horizon)}"
        )
    state = env.reset()
    steps: list[StepRecord] = []
    for _ in range(total):
        if rng.random() < eps:
            action = int(rng.integers(env.n_frames))
        else:
            action = int(np.argmax(forward(policy_params, state)))
        aux = aux_reward(state.history, action)
        next_state, _ = env.step(action)
        steps.append(
            StepRecord(
                state=state,
                action=action,
                next_state=next_state,
                p_after=mean_quality(env.true_quality),
                aux_reward=aux,
            )
        )
        state = next_state
    builder = decompose if task_decomposition else flat_transitions
    return builder(steps, stats_by_horizon, variant)


@dataclass
class TrainingLog:
    """Meta record plus one append-only entry per training episode."""

    meta: dict
    entries: list[dict] = field(default_factory=list)
    path: Path | None = None

    def open(self):
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w") as fh:
                fh.write(json.dumps({"meta": self.meta}, sort_keys=True) + "\n")

    def append(self, entry: dict) -> None:
        self.entries.append(entry)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def crop_window(config: EpisodeConfig, start: int, length: int, horizon: int) -> EpisodeConfig:
    """Episode restricted to frames [start, start+length); boundaries are
    shifted into window coordinates and the training horizon is applied."""
    if start < 0 or start + length > config.n_frames:
        raise DimensionError(
            f"window [{start}, {start + length}) outside [0, {config.n_frames})"
        )
    bounds = tuple(
        b - start for b in config.segment_boundaries if 0 < b - start < length
    )
    return EpisodeConfig(
        n_frames=length,
        horizon=horizon,
        n_objects=config.n_objects,
        segment_boundaries=bounds,
        difficulty=config.difficulty[start : start + length],
        info_value=config.info_value[start : start + length],
        propagation_scale=config.propagation_scale,
        env_gain=config.env_gain,
        novelty_decay=config.novelty_decay,
        cross_segment_attenuation=config.cross_segment_attenuation,
        obs_noise_sigma=config.obs_noise_sigma,
        seed=derive_seed(config.seed, 11, start),
        transition_noise=config.transition_noise,
    )


def _training_episode_config(config: EpisodeConfig, cfg: TrainConfig, rng) -> EpisodeConfig:
    if cfg.subseq_lens:
        # quantized shorter windows plus the episode's own length, so every
        # evaluation length lies inside the training distribution
        choices = {l for l in cfg.subseq_lens if l < config.n_frames}
        if config.n_frames <= max(cfg.subseq_lens):
            choices.add(config.n_frames)
        ordered = sorted(choices) or [min(min(cfg.subseq_lens), config.n_frames)]
        length = int(ordered[int(rng.integers(len(ordered)))])
    else:
        length = cfg.subseq_len
    if config.n_frames > length:
        start = int(rng.integers(0, config.n_frames - length + 1))
        return crop_window(config, start, length, cfg.t_train)
    return dc_replace(config, horizon=cfg.t_train)


def _batch_targets(
    policy: QNetworkParams,
    target: QNetworkParams,
    batch: list[Transition],
    cfg: TrainConfig,
) -> list[float]:
    """Double-Q targets for a sampled batch, honoring the reward-component
    ablation switches."""
    targets = [0.0] * len(batch)
    pending: list[int] = []
    for i, tr in enumerate(batch):
        if tr.terminal:
            if cfg.reward_components == "aux":
                targets[i] = SCALING_DELTA * tr.aux_reward
            else:
                targets[i] = SCALING_DELTA * tr.goal_reward
        else:
            pending.append(i)
    if pending:
        next_states = [batch[i].next_state for i in pending]
        policy_q = forward_many(policy, next_states)
        target_q = forward_many(target, next_states)
        for i, qp, qt in zip(pending, policy_q, target_q):
            a_next = int(np.argmax(qp))
            base = SCALING_DELTA * batch[i].aux_reward if cfg.reward_components != "goal" else 0.0
            targets[i] = base + DISCOUNT_GAMMA * float(qt[a_next])
    return targets


def train(
    cfg: TrainConfig,
    suite: list[EpisodeConfig],
    stats_cache: StatsCache | None = None,
    progress: Callable[[str], None] | None = None,
) -> tuple[QNetworkParams, TrainingLog]:
    """Full training run; returns the final policy parameters and the log."""
    if not suite:
        raise ConfigError("training requires a non-empty episode suite")
    cache = stats_cache if stats_cache is not None else StatsCache()
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 9)))
    params = init_params(
        seed=cfg.seed,
        h_scale=cfg.h_scale,
        use_quality=cfg.use_quality,
        use_history=cfg.use_history,
    )
    target = sync_target(params)
    adam = init_adam(params)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    horizons = range(1, cfg.t_train + 1)

    def stats_for(config: EpisodeConfig) -> dict[int, RandomStats]:
        return cache.stats_for(
            config, horizons, n_runs=cfg.stats_runs, seed=derive_seed(config.seed, 10)
        )

    def sample_episode_config() -> EpisodeConfig:
        source = suite[int(rng.integers(len(suite)))]
        return _training_episode_config(source, cfg, rng)

    log = TrainingLog(
        meta={
            "config": {k: v for k, v in cfg.__dict__.items() if not k.endswith("path")},
            "workers": cfg.workers,
            "n_suite_episodes": len(suite),
        },
        path=Path(cfg.log_path) if cfg.log_path else None,
    )
    log.open()

    # Warm fill with pure random behavior before any updates.
    warm_steps = 0
    while len(buffer) < WARM_FILL_FACTOR * cfg.batch_size:
        config = sample_episode_config()
        transitions = collect_episode(
            SimEnv(config), params, 1.0, stats_for(config),
            rng, cfg.variant, cfg.task_decomposition,
        )
        buffer.extend(transitions)
        warm_steps += cfg.t_train
    log.meta["warm_steps"] = warm_steps

    updates = 0

    def run_updates(n_steps: int):
        nonlocal params, target, adam, updates
        for _ in range(n_steps):
            batch = buffer.sample(rng, cfg.batch_size)
            targets = _batch_targets(params, target, batch, cfg)
            items = [(tr.state, tr.action, t) for tr, t in zip(batch, targets)]
            _, grads = batch_loss_and_grad(params, items)
            params, adam = adam_step(params, grads, adam, cfg.lr)
            updates += 1
            if updates % cfg.target_sync_period == 0:
                target = sync_target(params)

    def log_episode(index: int, config: EpisodeConfig, transitions, eps: float):
        goal_rewards = [tr.goal_reward for tr in transitions if tr.terminal]
        aux_rewards = [tr.aux_reward for tr in transitions if not tr.terminal] or [
            tr.aux_reward for tr in transitions
        ]
        greedy = run_episode(
            SimEnv(config), AgentPolicy(params), cfg.t_train, ObservationMode.ORACLE
        )
        log.append(
            {
                "episode": index,
                "steps": cfg.t_train,
                "mean_goal_reward": float(np.mean(goal_rewards)),
                "mean_aux_reward": float(np.mean(aux_rewards)),
                "eval_auc": greedy.auc,
                "epsilon": eps,
            }
        )

    def maybe_checkpoint(index: int):
        if cfg.checkpoint_every and cfg.checkpoint_path and (index + 1) % cfg.checkpoint_every == 0:
            from .qnet import save_params

            save_params(params, cfg.checkpoint_path)

    episode = 0
    if cfg.workers == 1:
        while episode < cfg.episodes:
            eps = epsilon(updates, cfg)
            config = sample_episode_config()
            transitions = collect_episode(
                SimEnv(config), params, eps, stats_for(config),
                rng, cfg.variant, cfg.task_decomposition,
            )
            buffer.extend(transitions)
            run_updates(cfg.t_train)
            log_episode(episode, config, transitions, eps)
            maybe_checkpoint(episode)
            if progress and (episode + 1) % 100 == 0:
                progress(f"episode {episode + 1}/{cfg.episodes} eps={eps:.3f}")
            episode += 1
    else:
        # Parallel collection: rollouts use a frozen params snapshot per
        # wave; updates stay sequential. Determinism is relaxed here.
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            while episode < cfg.episodes:
                wave = min(cfg.workers, cfg.episodes - episode)
                eps = epsilon(updates, cfg)
                configs = [sample_episode_config() for _ in range(wave)]
                stats = [stats_for(c) for c in configs]
                rngs = rng.spawn(wave)
                snapshot = params.copy()
                futures = [
                    pool.submit(
                        collect_episode, SimEnv(c), snapshot, eps, st, r,
                        cfg.variant, cfg.task_decomposition,
                    )
                    for c, st, r in zip(configs, stats, rngs)
                ]
                for config, fut in zip(configs, futures):
                    transitions = fut.result()
                    buffer.extend(transitions)
                    run_updates(cfg.t_train)
                    log_episode(episode, config, transitions, eps)
                    maybe_checkpoint(episode)
                    episode += 1
                if progress:
                    progress(f"episode {episode}/{cfg.episodes} eps={eps:.3f}")

    log.meta["total_updates"] = updates
    return params, log
