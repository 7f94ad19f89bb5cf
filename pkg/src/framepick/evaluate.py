"""Episode rollouts under any policy, AUC, multi-policy comparison, and
report emission.

Scoring always uses true quality, also in Wild mode: observation noise
affects the selector's decisions only, mirroring how ground-truth metrics
are computed even when the selector cannot see them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .episode import EpisodeConfig, EpisodeResult, mean_quality
from .errors import ConfigError, DomainError, FormatError
from .policies import Policy, RandomPolicy
from .simenv import ObservationMode, SimEnv
from .suite import hash_configs
from .util import derive_seed

BOOTSTRAP_RESAMPLES = 10_000


def auc(scores) -> float:
    """Area under the quality-vs-rounds curve; with uniform round spacing
    the mean of per-round scores ranks identically to the trapezoid area."""
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise DomainError("AUC of an empty score sequence is undefined")
    return float(values.mean())


def run_episode(
    env: SimEnv,
    policy: Policy,
    t_rounds: int | None = None,
    mode: ObservationMode = ObservationMode.ORACLE,
) -> EpisodeResult:
    """Reset the env and play `t_rounds` interactions under the policy."""
    state = env.reset()
    total = env.horizon if t_rounds is None else t_rounds
    obs_mode = policy.preferred_mode or mode
    actions = []
    scores = []
    for t in range(total):
        observation = env.observe(obs_mode)
        action = policy.select(observation, state.history, t, env.n_frames)
        state, _ = env.step(action)
        actions.append(int(action))
        scores.append(mean_quality(env.true_quality))
    return EpisodeResult(actions=tuple(actions), scores=tuple(scores))


@dataclass
class PolicySummary:
    name: str
    mean_auc: float
    std_auc: float | None
    per_episode_auc: list[float]
    curve: list[float]


@dataclass
class RunRecord:
    policy: str
    episode: int
    repeat: int
    auc: float
    scores: list[float]


@dataclass
class ComparisonReport:
    suite_hash: str
    horizon: int
    mode: str
    n_episodes: int
    random_repeats: int
    seed: int
    policies: dict[str, PolicySummary]
    runs: list[RunRecord]
    win_fractions: dict[str, dict[str, float]]
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "suite_hash": self.suite_hash,
            "horizon": self.horizon,
            "mode": self.mode,
            "n_episodes": self.n_episodes,
            "random_repeats": self.random_repeats,
            "seed": self.seed,
            "policies": {
                name: {
                    "mean_auc": s.mean_auc,
                    "std_auc": s.std_auc,
                    "per_episode_auc": s.per_episode_auc,
                    "curve": s.curve,
                }
                for name, s in self.policies.items()
            },
            "win_fractions": self.win_fractions,
            "runs": [
                {
                    "policy": r.policy,
                    "episode": r.episode,
                    "repeat": r.repeat,
                    "auc": r.auc,
                    "scores": r.scores,
                }
                for r in self.runs
            ],
        }


def compare(
    suite: list[EpisodeConfig],
    policies: list[Policy],
    t_rounds: int = 8,
    random_repeats: int = 5,
    seed: int = 0,
    mode: ObservationMode = ObservationMode.WILD,
) -> ComparisonReport:
    """Run every policy on every episode. The random baseline is repeated
    with derived seeds and reported as mean +- std over suite-level means;
    pairwise win fractions get bootstrap confidence intervals."""
    if not suite:
        raise ConfigError("comparison requires a non-empty episode suite")
    if not policies:
        raise ConfigError("comparison requires at least one policy")
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate policy names: {names}")

    episode_configs = [replace(c, horizon=t_rounds) for c in suite]
    runs: list[RunRecord] = []
    summaries: dict[str, PolicySummary] = {}
    per_episode: dict[str, np.ndarray] = {}

    for policy in sorted(policies, key=lambda p: p.name):
        repeats = random_repeats if isinstance(policy, RandomPolicy) else 1
        auc_matrix = np.zeros((len(episode_configs), repeats))
        curves = []
        for ep_idx, config in enumerate(episode_configs):
            for rep in range(repeats):
                runner = policy
                if isinstance(policy, RandomPolicy):
                    runner = policy.reseeded(derive_seed(seed, 12, ep_idx, rep))
                result = run_episode(SimEnv(config), runner, t_rounds, mode)
                auc_matrix[ep_idx, rep] = result.auc
                curves.append(result.scores)
                runs.append(
                    RunRecord(
                        policy=policy.name,
                        episode=ep_idx,
                        repeat=rep,
                        auc=result.auc,
                        scores=list(result.scores),
                    )
                )
        suite_means = auc_matrix.mean(axis=0)  # one value per repeat
        std = float(np.std(suite_means, ddof=1)) if repeats > 1 else None
        per_episode[policy.name] = auc_matrix.mean(axis=1)
        summaries[policy.name] = PolicySummary(
            name=policy.name,
            mean_auc=float(suite_means.mean()),
            std_auc=std,
            per_episode_auc=[float(a) for a in per_episode[policy.name]],
            curve=[float(v) for v in np.mean(curves, axis=0)],
        )

    win_fractions = _win_fractions(per_episode, seed)
    return ComparisonReport(
        suite_hash=hash_configs(suite),
        horizon=t_rounds,
        mode=mode.value,
        n_episodes=len(suite),
        random_repeats=random_repeats,
        seed=seed,
        policies=summaries,
        runs=runs,
        win_fractions=win_fractions,
    )


def _win_fractions(per_episode: dict[str, np.ndarray], seed: int) -> dict[str, dict[str, float]]:
    """Share of episodes where A's AUC >= B's (ties count for both sides),
    with a 95% bootstrap CI over episodes."""
    out: dict[str, dict[str, float]] = {}
    names = sorted(per_episode)
    n = len(next(iter(per_episode.values()))) if per_episode else 0
    for a in names:
        for b in names:
            if a == b:
                continue
            wins = (per_episode[a] >= per_episode[b]).astype(np.float64)
            rng = np.random.default_rng(np.random.SeedSequence((seed, 13)))
            idx = rng.integers(0, n, size=(BOOTSTRAP_RESAMPLES, n))
            resampled = wins[idx].mean(axis=1)
            lo, hi = np.percentile(resampled, [2.5, 97.5])
            out[f"{a}_vs_{b}"] = {
                "win_fraction": float(wins.mean()),
                "ci_low": float(lo),
                "ci_high": float(hi),
            }
    return out


def emit_report(report: ComparisonReport, format: str, path: str | Path) -> None:
    """Write the report as CSV (one row per policy/episode/repeat) or as
    the full nested JSON document."""
    if not report.runs or not report.policies:
        raise ConfigError("refusing to emit an empty comparison report")
    path = Path(path)
    if format == "csv":
        header = ["policy", "episode", "repeat", "auc"] + [
            f"s{i}" for i in range(1, report.horizon + 1)
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["# suite_hash", report.suite_hash, "tool_version", report.tool_version])
            writer.writerow(header)
            for run in report.runs:
                writer.writerow(
                    [run.policy, run.episode, run.repeat, repr(run.auc)]
                    + [repr(s) for s in run.scores]
                )
    elif format == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        raise ConfigError(f"unknown report format {format!r}; use csv or json")


def parse_report_csv(path: str | Path) -> list[RunRecord]:
    """Read back rows written by emit_report(format='csv')."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        lines = [row for row in reader if row]
    if len(lines) < 2 or not lines[0][0].startswith("# suite_hash"):
        raise FormatError(f"{path} is not a framepick report CSV")
    header = lines[1]
    n_scores = len(header) - 4
    for row in lines[2:]:
        rows.append(
            RunRecord(
                policy=row[0],
                episode=int(row[1]),
                repeat=int(row[2]),
                auc=float(row[3]),
                scores=[float(v) for v in row[4 : 4 + n_scores]],
            )
        )
    return rows
