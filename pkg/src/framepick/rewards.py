"""Reward functions, random-policy statistics, and Q-target construction.

The terminal (goal) reward compares the episode's final performance P
against the mean/std of a 30-run random-selection baseline; the per-step
auxiliary reward is +1 when the chosen frame is among the least-recommended
ones and -1 otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .episode import AgentState, EpisodeConfig, mean_quality
from .errors import ConfigError, ConsistencyError, DomainError
from .simenv import SimEnv
from .util import stable_hash64

SIGMA_FLOOR = 1e-3  # guards against division blow-up on near-deterministic episodes

SCALING_DELTA = 0.1
DISCOUNT_GAMMA = 0.95

GOAL_VARIANTS = ("naive", "final")


@dataclass(frozen=True)
class RandomStats:
    """Random-policy performance distribution at one horizon."""

    horizon: int
    mu_hat: float
    sigma_hat: float
    n_runs: int

    def __post_init__(self):
        if self.n_runs < 2:
            raise DomainError(f"n_runs must be >= 2, got {self.n_runs}")
        if self.sigma_hat < SIGMA_FLOOR:
            raise DomainError(f"sigma_hat below floor {SIGMA_FLOOR}: {self.sigma_hat}")


@dataclass(frozen=True)
class StepRecord:
    """One rollout step as consumed by decompose."""

    state: AgentState
    action: int
    next_state: AgentState
    p_after: float
    aux_reward: float


@dataclass(frozen=True)
class Transition:
    """One replay-buffer record."""

    state: AgentState
    action: int
    next_state: AgentState
    terminal: bool
    horizon: int
    aux_reward: float
    goal_reward: float | None = None

    def __post_init__(self):
        if self.aux_reward not in (-1.0, 1.0):
            raise DomainError(f"aux_reward must be +-1, got {self.aux_reward}")
        if self.terminal:
            if self.goal_reward is None:
                raise ConsistencyError("terminal transition requires a goal reward")
            if self.state.round + 1 != self.horizon:
                raise ConsistencyError(
                    f"terminal transition at round {self.state.round} "
                    f"inconsistent with horizon {self.horizon}"
                )


def random_policy_stats(
    env_factory: Callable[[], SimEnv],
    horizon: int,
    n_runs: int = 30,
    seed: int = 0,
) -> RandomStats:
    """Mean and unbiased std of final performance over uniform-random
    rollouts of the given length; std is floored at SIGMA_FLOOR."""
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if n_runs < 2:
        raise DomainError(f"n_runs must be >= 2, got {n_runs}")
    finals = np.empty(n_runs)
    for run in range(n_runs):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 6, run)))
        env = env_factory()
        env.reset()
        for _ in range(horizon):
            env.step(int(rng.integers(env.n_frames)))
        finals[run] = mean_quality(env.true_quality)
    sigma = float(np.std(finals, ddof=1))
    return RandomStats(
        horizon=horizon,
        mu_hat=float(np.mean(finals)),
        sigma_hat=max(sigma, SIGMA_FLOOR),
        n_runs=n_runs,
    )


def goal_reward(p: float, stats: RandomStats, variant: str = "final") -> float:
    """Terminal reward. `naive` is positive above the random mean; `final`
    is positive only above mean + one std."""
    if variant not in GOAL_VARIANTS:
        raise DomainError(f"unknown goal-reward variant {variant!r}")
    if variant == "naive":
        return (p - stats.mu_hat) / stats.sigma_hat
    return (p - (stats.mu_hat + stats.sigma_hat)) / stats.sigma_hat


def aux_reward(history: Sequence[int], action: int) -> float:
    """+1 when the action is one of the least-recommended frames, else -1.

    Membership in the argmin set counts: at round zero every frame ties,
    and the first pick must not be punishable.
    """
    h = np.asarray(history)
    if not 0 <= action < h.size:
        raise IndexError(f"action {action} out of range [0, {h.size})")
    return 1.0 if h[action] == h.min() else -1.0


def q_target(
    tr: Transition,
    target_q_next: float = 0.0,
    delta: float = SCALING_DELTA,
    gamma: float = DISCOUNT_GAMMA,
) -> float:
    """Two-case action-value target: terminal steps earn the scaled goal
    reward; intermediate steps earn the scaled auxiliary reward plus the
    discounted target-network value of the next state (double Q-learning:
    the caller selects the next action with the policy network and
    evaluates it with the target network)."""
    if tr.terminal:
        if tr.goal_reward is None:
            raise ConsistencyError("terminal transition without goal reward")
        return delta * tr.goal_reward
    return delta * tr.aux_reward + gamma * target_q_next


def decompose(
    rollout: Sequence[StepRecord],
    stats_by_horizon: Mapping[int, RandomStats],
    variant: str = "final",
) -> list[Transition]:
    """Split one length-T rollout into the transitions of all T sub-tasks.

    Step t (1-based) terminates the horizon-t sub-task, so it always emits
    a terminal transition scored against that horizon's random baseline;
    every step before the last additionally serves as an intermediate step
    of the longer sub-tasks. Total transitions: 2T - 1.
    """
    steps = list(rollout)
    if not steps:
        raise DomainError("cannot decompose an empty rollout")
    total = len(steps)
    missing = [t for t in range(1, total + 1) if t not in stats_by_horizon]
    if missing:
        raise ConfigError(f"missing random-policy stats for horizons {missing}")
    out: list[Transition] = []
    for t, step in enumerate(steps, start=1):
        out.append(
            Transition(
                state=step.state,
                action=step.action,
                next_state=step.next_state,
                terminal=True,
                horizon=t,
                aux_reward=step.aux_reward,
                goal_reward=goal_reward(step.p_after, stats_by_horizon[t], variant),
            )
        )
        if t < total:
            out.append(
                Transition(
                    state=step.state,
                    action=step.action,
                    next_state=step.next_state,
                    terminal=False,
                    horizon=total,
                    aux_reward=step.aux_reward,
                )
            )
    return out


def flat_transitions(
    rollout: Sequence[StepRecord],
    stats_by_horizon: Mapping[int, RandomStats],
    variant: str = "final",
) -> list[Transition]:
    """No-decomposition ablation: only the full-horizon sub-task, T
    transitions with a single terminal one at the end."""
    steps = list(rollout)
    if not steps:
        raise DomainError("cannot build transitions from an empty rollout")
    total = len(steps)
    if total not in stats_by_horizon:
        raise ConfigError(f"missing random-policy stats for horizon {total}")
    out: list[Transition] = []
    for t, step in enumerate(steps, start=1):
        if t == total:
            out.append(
                Transition(
                    state=step.state,
                    action=step.action,
                    next_state=step.next_state,
                    terminal=True,
                    horizon=total,
                    aux_reward=step.aux_reward,
                    goal_reward=goal_reward(step.p_after, stats_by_horizon[total], variant),
                )
            )
        else:
            out.append(
                Transition(
                    state=step.state,
                    action=step.action,
                    next_state=step.next_state,
                    terminal=False,
                    horizon=total,
                    aux_reward=step.aux_reward,
                )
            )
    return out


def stats_key(config: EpisodeConfig, n_runs: int, seed: int) -> str:
    return format(stable_hash64([config.to_dict(), n_runs, seed]), "016x")


class StatsCache:
    """Disk-backed map from (config, n_runs, seed) to per-horizon stats.

    File layout: JSON object keyed by the config hash, each value a map
    from horizon to {mu_hat, sigma_hat, n_runs}.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._data: dict[str, dict[str, dict]] = {}
        if self.path is not None and self.path.exists():
            self._data = json.loads(self.path.read_text())

    def stats_for(
        self,
        config: EpisodeConfig,
        horizons: Iterable[int],
        n_runs: int = 30,
        seed: int = 0,
    ) -> dict[int, RandomStats]:
        key = stats_key(config, n_runs, seed)
        entry = self._data.setdefault(key, {})
        out: dict[int, RandomStats] = {}
        dirty = False
        for horizon in horizons:
            hkey = str(horizon)
            if hkey not in entry:
                stats = random_policy_stats(
                    lambda: SimEnv(config), horizon, n_runs=n_runs, seed=seed
                )
                entry[hkey] = {
                    "mu_hat": stats.mu_hat,
                    "sigma_hat": stats.sigma_hat,
                    "n_runs": stats.n_runs,
                }
                dirty = True
            rec = entry[hkey]
            out[horizon] = RandomStats(
                horizon=horizon,
                mu_hat=rec["mu_hat"],
                sigma_hat=rec["sigma_hat"],
                n_runs=rec["n_runs"],
            )
        if dirty and self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(self._data, sort_keys=True, indent=1))
        return out
